#include "pbi/propagation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include "pbi/rng.hpp"

namespace pbi {

void CsrMatrix::multiply(const Matrix& in, Matrix& out) const {
  if (static_cast<std::size_t>(in.rows()) != rows) {
    throw ShapeMismatch("sparse multiply: operator has " + std::to_string(rows) +
                        " columns, input has " + std::to_string(in.rows()) + " rows");
  }
  out.resize(in.rows(), in.cols());
  parallel_for(rows, [&](std::size_t begin, std::size_t end) {
    for (std::size_t v = begin; v < end; ++v) {
      auto dst = out.row(static_cast<Eigen::Index>(v));
      dst.setZero();
      for (std::size_t k = row_ptr[v]; k < row_ptr[v + 1]; ++k) {
        dst.noalias() += val[k] * in.row(col[k]);
      }
    }
  });
}

CsrMatrix CsrMatrix::transposed() const {
  CsrMatrix t;
  t.rows = rows;
  t.row_ptr.assign(rows + 1, 0);
  for (Index c : col) ++t.row_ptr[c + 1];
  std::partial_sum(t.row_ptr.begin(), t.row_ptr.end(), t.row_ptr.begin());
  t.col.resize(col.size());
  t.val.resize(val.size());
  std::vector<std::size_t> cursor(t.row_ptr.begin(), t.row_ptr.end() - 1);
  for (std::size_t v = 0; v < rows; ++v) {
    for (std::size_t k = row_ptr[v]; k < row_ptr[v + 1]; ++k) {
      const std::size_t slot = cursor[col[k]]++;
      t.col[slot] = static_cast<Index>(v);
      t.val[slot] = val[k];
    }
  }
  return t;
}

PropagationOperator PropagationOperator::build(const InteractionGraph& graph, double r) {
  if (!(r >= 0.0 && r <= 1.0)) throw InvalidArgument("normalization exponent r must lie in [0, 1]");
  PropagationOperator op;
  op.num_users_ = graph.num_users();
  op.r_ = r;
  const std::size_t nu = graph.num_users();
  const std::size_t n = graph.num_nodes();

  auto coef = [&](Index u, Index i) {
    const double du = graph.user_degree(u);
    const double di = graph.item_degree(i);
    return 1.0 / (std::pow(du, r) * std::pow(di, 1.0 - r));
  };

  CsrMatrix& a = op.forward_;
  a.rows = n;
  a.row_ptr.assign(n + 1, 0);
  a.col.reserve(2 * graph.num_edges());
  a.val.reserve(2 * graph.num_edges());
  for (Index u = 0; u < nu; ++u) {
    for (Index i : graph.items_of(u)) {
      a.col.push_back(static_cast<Index>(nu + i));
      a.val.push_back(coef(u, i));
    }
    a.row_ptr[u + 1] = a.col.size();
  }
  for (Index i = 0; i < graph.num_items(); ++i) {
    for (Index u : graph.users_of(i)) {
      a.col.push_back(u);
      a.val.push_back(coef(u, i));
    }
    a.row_ptr[nu + i + 1] = a.col.size();
  }
  op.transpose_ = a.transposed();
  return op;
}

double PropagationOperator::coefficient(std::size_t row, std::size_t col) const {
  const auto b = forward_.col.begin() + static_cast<std::ptrdiff_t>(forward_.row_ptr[row]);
  const auto e = forward_.col.begin() + static_cast<std::ptrdiff_t>(forward_.row_ptr[row + 1]);
  const auto it = std::lower_bound(b, e, static_cast<Index>(col));
  if (it == e || *it != col) return 0.0;
  return forward_.val[static_cast<std::size_t>(it - forward_.col.begin())];
}

std::vector<double> uniform_layer_weights(std::size_t layers) {
  return std::vector<double>(layers + 1, 1.0 / static_cast<double>(layers + 1));
}

double xavier_bound(std::size_t dim) {
  return std::sqrt(6.0 / static_cast<double>(dim + dim));
}

EmbeddingTable init_embeddings(std::size_t num_nodes, std::size_t dim, std::size_t layers,
                               std::uint64_t seed) {
  if (dim < 1) throw InvalidArgument("embedding dimension must be >= 1");
  EmbeddingTable t;
  t.layers = layers;
  t.layer_weights = uniform_layer_weights(layers);
  t.base.resize(static_cast<Eigen::Index>(num_nodes), static_cast<Eigen::Index>(dim));
  const double bound = xavier_bound(dim);
  Rng rng = make_stream(seed, 0);
  double* p = t.base.data();
  for (Eigen::Index k = 0; k < t.base.size(); ++k) p[k] = bound * (2.0 * uniform_unit(rng) - 1.0);
  return t;
}

namespace {

void check_table(const PropagationOperator& op, const EmbeddingTable& table, const Matrix& m) {
  if (static_cast<std::size_t>(m.rows()) != op.num_nodes()) {
    throw ShapeMismatch("operator covers " + std::to_string(op.num_nodes()) +
                        " nodes but matrix has " + std::to_string(m.rows()) + " rows");
  }
  if (table.layer_weights.size() != table.layers + 1) {
    throw InvalidArgument("layer_weights must have K + 1 entries");
  }
}

template <typename Apply>
Matrix layer_sum(const Matrix& x0, const EmbeddingTable& table, Apply apply) {
  Matrix acc = table.layer_weights[0] * x0;
  if (table.layers == 0) return acc;
  Matrix cur = x0;
  Matrix next;
  for (std::size_t k = 1; k <= table.layers; ++k) {
    apply(cur, next);
    acc.noalias() += table.layer_weights[k] * next;
    cur.swap(next);
  }
  return acc;
}

}  // namespace

Matrix propagate(const PropagationOperator& op, const EmbeddingTable& table) {
  check_table(op, table, table.base);
  return layer_sum(table.base, table,
                   [&](const Matrix& in, Matrix& out) { op.apply(in, out); });
}

Matrix backward_scores(const PropagationOperator& op, const Matrix& grad_h,
                       const EmbeddingTable& table) {
  check_table(op, table, grad_h);
  if (grad_h.cols() != table.base.cols()) throw ShapeMismatch("gradient width differs from dim");
  return layer_sum(grad_h, table,
                   [&](const Matrix& in, Matrix& out) { op.apply_transpose(in, out); });
}

// ---- checkpoint IO ----

namespace {

constexpr char kMagic[7] = {'P', 'B', 'I', 'E', 'M', 'B', '1'};

template <typename T>
void put_le(std::ostream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in, const std::filesystem::path& path) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw ParseError("checkpoint '" + path.string() + "' is truncated");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

CheckpointHeader read_header(std::istream& in, const std::filesystem::path& path) {
  char magic[7];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ParseError("'" + path.string() + "' is not a PBIEMB1 checkpoint");
  }
  CheckpointHeader h;
  h.num_users = get_le<std::uint64_t>(in, path);
  h.num_items = get_le<std::uint64_t>(in, path);
  h.dim = get_le<std::uint64_t>(in, path);
  h.layers = get_le<std::uint64_t>(in, path);
  if (h.dim == 0 || h.layers > 1024) throw ParseError("checkpoint header has implausible dims");
  h.r = get_le<double>(in, path);
  h.layer_weights.resize(h.layers + 1);
  for (auto& w : h.layer_weights) w = get_le<double>(in, path);
  return h;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto& t = ckpt.table;
  if (t.num_nodes() != ckpt.num_users + ckpt.num_items) {
    throw ShapeMismatch("checkpoint table rows differ from num_users + num_items");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
  out.write(kMagic, sizeof(kMagic));
  put_le<std::uint64_t>(out, ckpt.num_users);
  put_le<std::uint64_t>(out, ckpt.num_items);
  put_le<std::uint64_t>(out, t.dim());
  put_le<std::uint64_t>(out, t.layers);
  put_le<double>(out, ckpt.r);
  for (double w : t.layer_weights) put_le<double>(out, w);
  const double* p = t.base.data();
  for (Eigen::Index k = 0; k < t.base.size(); ++k) put_le<float>(out, static_cast<float>(p[k]));
  if (!out) throw IoError("write error on checkpoint '" + path.string() + "'");
}

CheckpointHeader read_checkpoint_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  auto h = read_header(in, path);
  h.file_size = std::filesystem::file_size(path);
  return h;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  const auto h = read_header(in, path);
  Checkpoint c;
  c.num_users = h.num_users;
  c.num_items = h.num_items;
  c.r = h.r;
  c.table.layers = h.layers;
  c.table.layer_weights = h.layer_weights;
  c.table.base.resize(static_cast<Eigen::Index>(h.num_users + h.num_items),
                      static_cast<Eigen::Index>(h.dim));
  double* p = c.table.base.data();
  for (Eigen::Index k = 0; k < c.table.base.size(); ++k) p[k] = get_le<float>(in, path);
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ParseError("checkpoint '" + path.string() + "' has trailing bytes");
  }
  return c;
}

}  // namespace pbi
