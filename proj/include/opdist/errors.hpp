#pragma once

#include <stdexcept>
#include <string>

namespace opdist {

// Base for every error the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file. The message names file, line and field.
class LoadError : public Error {
 public:
  using Error::Error;
};

// A domain invariant does not hold (bad weight, mismatched lengths, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// No usable human data for a (group, question) pair.
class NoDataError : public Error {
 public:
  NoDataError(std::string group, std::string question, const std::string& why)
      : Error("no data for group '" + group + "' on question '" + question + "': " + why),
        group_(std::move(group)),
        question_(std::move(question)) {}

  const std::string& group() const noexcept { return group_; }
  const std::string& question() const noexcept { return question_; }

 private:
  std::string group_;
  std::string question_;
};

// Model output that cannot be turned into a distribution.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::string snippet)
      : Error(what + " (in: \"" + snippet + "\")"), snippet_(std::move(snippet)) {}

  const std::string& snippet() const noexcept { return snippet_; }

 private:
  std::string snippet_;
};

// HTTP or protocol failure after all retries were spent.
class TransportError : public Error {
 public:
  using Error::Error;
};

// The endpoint answered but cannot provide what was asked (no logprobs, no option letters).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

// relative_improvement() called with zero_shot <= lower.
class DegenerateGapError : public Error {
 public:
  using Error::Error;
};

// Run configuration failed validation. field() is the dotted path of the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& why)
      : Error("config error at " + field + ": " + why), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace opdist
