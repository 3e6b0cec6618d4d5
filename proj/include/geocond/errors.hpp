#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace geocond {

/// Base type for every library error. CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
   public:
    using Error::Error;
};

class FormatError : public Error {
   public:
    using Error::Error;
};

class VersionError : public Error {
   public:
    using Error::Error;
};

class InvalidInput : public Error {
   public:
    using Error::Error;
};

class InsufficientData : public Error {
   public:
    using Error::Error;
};

class DegenerateInput : public Error {
   public:
    using Error::Error;
};

class NumericalError : public Error {
   public:
    using Error::Error;
};

class SceneError : public Error {
   public:
    using Error::Error;
};

/// Carries the ids of the records that failed validation.
class ValidationError : public Error {
   public:
    ValidationError(const std::string& msg, std::vector<std::string> offenders = {})
        : Error(msg), offenders_(std::move(offenders)) {}

    const std::vector<std::string>& offenders() const { return offenders_; }

   private:
    std::vector<std::string> offenders_;
};

}  // namespace geocond
