#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace loadclust {

/// Base of every error raised by the library. The category drives the CLI
/// exit code: configuration problems, simulation failures and I/O failures
/// are reported distinctly.
class Error : public std::runtime_error {
 public:
  enum class Category { config, simulation, io };

  Error(Category category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  Category category() const noexcept { return category_; }

 private:
  Category category_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error(Category::config, what) {}
};

/// The mechanical torque exceeds the pull-out torque at the requested voltage.
class NoEquilibrium : public Error {
 public:
  NoEquilibrium(double torque_gap, const std::string& what)
      : Error(Category::simulation, what), torque_gap_(torque_gap) {}

  /// T_m minus the maximum electrical torque (always > 0).
  double torque_gap() const noexcept { return torque_gap_; }

 private:
  double torque_gap_;
};

class Diverged : public Error {
 public:
  Diverged(double time, const std::string& what)
      : Error(Category::simulation, what), time_(time) {}

  double time() const noexcept { return time_; }

 private:
  double time_;
};

class GridMismatch : public Error {
 public:
  GridMismatch(std::size_t first, std::size_t second, const std::string& what)
      : Error(Category::config, what), first_(first), second_(second) {}

  std::size_t first() const noexcept { return first_; }
  std::size_t second() const noexcept { return second_; }

 private:
  std::size_t first_;
  std::size_t second_;
};

class ConstantReference : public Error {
 public:
  explicit ConstantReference(const std::string& what)
      : Error(Category::simulation, what) {}
};

class IndexOutOfRange : public Error {
 public:
  explicit IndexOutOfRange(const std::string& what)
      : Error(Category::config, what) {}
};

class InfeasibleAfterRetries : public Error {
 public:
  explicit InfeasibleAfterRetries(const std::string& what)
      : Error(Category::simulation, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(Category::io, what) {}
};

}  // namespace loadclust
