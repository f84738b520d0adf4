#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace pstitch {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed correspondence file (syntax or schema).
class ParseError : public Error {
 public:
  using Error::Error;
};

enum class RecordKind { Point, Line, Set };

// A correspondence record violates a DualFeatureSet invariant.
class ValidationError : public Error {
 public:
  ValidationError(RecordKind kind, std::optional<std::size_t> record, const std::string& what)
      : Error(describe(kind, record, what)), kind_(kind), record_(record) {}

  RecordKind kind() const noexcept { return kind_; }
  std::optional<std::size_t> record() const noexcept { return record_; }

 private:
  static std::string describe(RecordKind kind, std::optional<std::size_t> record,
                              const std::string& what) {
    std::string s;
    switch (kind) {
      case RecordKind::Point: s = "point"; break;
      case RecordKind::Line: s = "line"; break;
      case RecordKind::Set: s = "set"; break;
    }
    if (record) s += " record " + std::to_string(*record);
    return s + ": " + what;
  }

  RecordKind kind_;
  std::optional<std::size_t> record_;
};

class RankDeficient : public Error {
 public:
  using Error::Error;
};

class AtInfinity : public Error {
 public:
  using Error::Error;
};

class DegenerateGeometry : public Error {
 public:
  using Error::Error;
};

class Disconnected : public Error {
 public:
  using Error::Error;
};

class OutOfMesh : public Error {
 public:
  using Error::Error;
};

class SingularSystem : public Error {
 public:
  using Error::Error;
};

class EmptyOverlap : public Error {
 public:
  using Error::Error;
};

class NoAnchor : public Error {
 public:
  using Error::Error;
};

// Wraps a failure raised inside one pipeline stage for one hypothesis.
class StageError : public Error {
 public:
  StageError(std::string stage, std::optional<std::size_t> hypothesis, const std::string& what)
      : Error(stage + (hypothesis ? " (hypothesis " + std::to_string(*hypothesis) + ")" : "") +
              ": " + what),
        stage_(std::move(stage)),
        hypothesis_(hypothesis) {}

  const std::string& stage() const noexcept { return stage_; }
  std::optional<std::size_t> hypothesis() const noexcept { return hypothesis_; }

 private:
  std::string stage_;
  std::optional<std::size_t> hypothesis_;
};

}  // namespace pstitch
