#pragma once

#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridcity {

/// Root of every error the engine raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

/// A plan that parsed but violates a layout invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class OverlapError : public ValidationError {
 public:
  OverlapError(int index, std::set<std::string> districts)
      : ValidationError(describe(index, districts)), index_(index), districts_(std::move(districts)) {}

  int index() const { return index_; }
  const std::set<std::string>& districts() const { return districts_; }

 private:
  static std::string describe(int index, const std::set<std::string>& districts) {
    std::string msg = "grid index " + std::to_string(index) + " claimed by multiple districts:";
    for (const auto& d : districts) msg += " " + d;
    return msg;
  }

  int index_;
  std::set<std::string> districts_;
};

class CoverageError : public ValidationError {
 public:
  explicit CoverageError(std::vector<int> indices)
      : ValidationError(describe(indices)), indices_(std::move(indices)) {}

  const std::vector<int>& indices() const { return indices_; }

 private:
  static std::string describe(const std::vector<int>& indices) {
    std::string msg = "grid indices not covered by any district:";
    for (int i : indices) msg += " " + std::to_string(i);
    return msg;
  }

  std::vector<int> indices_;
};

class PlanValidationError : public Error {
 public:
  PlanValidationError(const std::string& last_error, int attempts)
      : Error("city plan rejected after " + std::to_string(attempts) + " attempt(s): " + last_error),
        last_error_(last_error),
        attempts_(attempts) {}

  const std::string& last_error() const { return last_error_; }
  int attempts() const { return attempts_; }

 private:
  std::string last_error_;
  int attempts_;
};

class DesignValidationError : public Error {
 public:
  DesignValidationError(std::string district_id, std::set<int> missing, std::set<int> extra)
      : Error(describe(district_id, missing, extra)),
        district_id_(std::move(district_id)),
        missing_(std::move(missing)),
        extra_(std::move(extra)) {}

  const std::string& district_id() const { return district_id_; }
  const std::set<int>& missing() const { return missing_; }
  const std::set<int>& extra() const { return extra_; }

 private:
  static std::string describe(const std::string& id, const std::set<int>& missing,
                              const std::set<int>& extra) {
    std::string msg = "grid descriptions for district '" + id + "' do not match its cells;";
    msg += " missing:";
    for (int i : missing) msg += " " + std::to_string(i);
    msg += "; extra:";
    for (int i : extra) msg += " " + std::to_string(i);
    return msg;
  }

  std::string district_id_;
  std::set<int> missing_;
  std::set<int> extra_;
};

class TemplateError : public Error {
 public:
  using Error::Error;
};

/// A provider call failed for good (after the retry policy ran out, or on a
/// non-retryable failure).
class ProviderError : public Error {
 public:
  explicit ProviderError(const std::string& what, int attempts = 1)
      : Error(what), attempts_(attempts) {}
  int attempts() const { return attempts_; }

 private:
  int attempts_;
};

/// Timeout, rate limit or 5xx: worth retrying.
class TransientProviderError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

class EmptyCorpusError : public Error {
 public:
  using Error::Error;
};

class VerdictParseError : public Error {
 public:
  using Error::Error;
};

class GeometryError : public Error {
 public:
  using Error::Error;
};

class EmbeddingError : public Error {
 public:
  using Error::Error;
};

class ExpansionInferenceError : public Error {
 public:
  using Error::Error;
};

class NoCandidateError : public Error {
 public:
  using Error::Error;
};

class OccupiedError : public Error {
 public:
  using Error::Error;
};

class RoadError : public Error {
 public:
  using Error::Error;
};

class IncompleteCityError : public Error {
 public:
  explicit IncompleteCityError(std::vector<int> indices)
      : Error(describe(indices)), indices_(std::move(indices)) {}
  const std::vector<int>& indices() const { return indices_; }

 private:
  static std::string describe(const std::vector<int>& indices) {
    std::string msg = "tiles without a finished asset:";
    for (int i : indices) msg += " " + std::to_string(i);
    return msg;
  }
  std::vector<int> indices_;
};

}  // namespace gridcity
