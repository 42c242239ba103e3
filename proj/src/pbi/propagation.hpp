#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "pbi/common.hpp"
#include "pbi/graph.hpp"

namespace pbi {

// Compressed sparse rows; row v lists the nodes aggregated into v.
struct CsrMatrix {
  std::size_t rows = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<Index> col;
  std::vector<double> val;

  // out = this * in, rows computed independently (parallel over rows).
  void multiply(const Matrix& in, Matrix& out) const;
  CsrMatrix transposed() const;
};

// Degree-normalized adjacency over users followed by items (node index of
// item i is num_users + i). Entry (u, i) and (i, u) hold
// 1 / (|N_u|^r * |N_i|^(1-r)); r = 0.5 is the symmetric LightGCN weighting.
class PropagationOperator {
 public:
  static PropagationOperator build(const InteractionGraph& graph, double r = 0.5);

  std::size_t num_nodes() const { return forward_.rows; }
  std::size_t num_users() const { return num_users_; }
  double r() const { return r_; }
  std::size_t nnz() const { return forward_.col.size(); }

  void apply(const Matrix& in, Matrix& out) const { forward_.multiply(in, out); }
  void apply_transpose(const Matrix& in, Matrix& out) const { transpose_.multiply(in, out); }

  // Entry lookup (zero when absent).
  double coefficient(std::size_t row, std::size_t col) const;

 private:
  std::size_t num_users_ = 0;
  double r_ = 0.5;
  CsrMatrix forward_;
  CsrMatrix transpose_;
};

// Trainable base embeddings X plus the layer combination used to derive H.
struct EmbeddingTable {
  Matrix base;
  std::size_t layers = 0;
  std::vector<double> layer_weights;  // K + 1 entries

  std::size_t num_nodes() const { return static_cast<std::size_t>(base.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(base.cols()); }
};

std::vector<double> uniform_layer_weights(std::size_t layers);

// Xavier-uniform on [-sqrt(6 / (2 dim)), +sqrt(6 / (2 dim))].
EmbeddingTable init_embeddings(std::size_t num_nodes, std::size_t dim, std::size_t layers,
                               std::uint64_t seed);
double xavier_bound(std::size_t dim);

// H = sum_k alpha_k A^k X.
Matrix propagate(const PropagationOperator& op, const EmbeddingTable& table);

// Adjoint of propagate: sum_k alpha_k (A^T)^k G. Exact gradient w.r.t. X
// given the gradient w.r.t. H, since X -> H is linear.
Matrix backward_scores(const PropagationOperator& op, const Matrix& grad_h,
                       const EmbeddingTable& table);

inline double score(const Matrix& h, std::size_t num_users, Index user, Index item) {
  return h.row(user).dot(h.row(num_users + item));
}

// Binary model file: "PBIEMB1", u64 num_users, num_items, dim, K (LE), f64 r,
// f64 alpha_k x (K+1), then the base matrix as row-major f32.
struct Checkpoint {
  std::uint64_t num_users = 0;
  std::uint64_t num_items = 0;
  double r = 0.5;
  EmbeddingTable table;
};

struct CheckpointHeader {
  std::uint64_t num_users = 0;
  std::uint64_t num_items = 0;
  std::uint64_t dim = 0;
  std::uint64_t layers = 0;
  double r = 0.5;
  std::vector<double> layer_weights;
  std::uint64_t file_size = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
CheckpointHeader read_checkpoint_header(const std::filesystem::path& path);

}  // namespace pbi
