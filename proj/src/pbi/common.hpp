#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace pbi {

using Index = std::uint32_t;

// Row-major so that a node's embedding is one contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class Diverged : public Error {
 public:
  using Error::Error;
};

// Warnings go through a process-wide sink; an empty sink restores stderr.
using LogSink = std::function<void(std::string_view)>;
void set_log_sink(LogSink sink);
void warn(std::string_view message);

// Worker count for the parallel kernels; reads PBI_THREADS on first use.
// 0 and 1 both mean single-threaded.
unsigned worker_threads();
void set_worker_threads(unsigned n);

// Runs fn(begin, end) over [0, n) split into contiguous chunks, one per worker.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace pbi
