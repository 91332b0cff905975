#pragma once

#include <stdexcept>
#include <string>

namespace gridres {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ingest
class MissingColumn : public Error { using Error::Error; };
class MalformedRow : public Error { using Error::Error; };
class UnmappedLabel : public Error {
public:
    explicit UnmappedLabel(std::string label)
        : Error("unmapped cause label: '" + label + "'"), label_(std::move(label)) {}
    const std::string& label() const noexcept { return label_; }

private:
    std::string label_;
};
class TaxonomyError : public Error { using Error::Error; };
class MissingBase : public Error { using Error::Error; };

// reliability
class EmptyGroupNt : public Error { using Error::Error; };

// regress
class DegenerateDesign : public Error { using Error::Error; };
class ModelMismatch : public Error { using Error::Error; };
class InsufficientData : public Error { using Error::Error; };
class NothingFlagged : public Error { using Error::Error; };

// select
class AllColumnsDegenerate : public Error { using Error::Error; };
class TooFewRows : public Error { using Error::Error; };

// med
class InsufficientHistory : public Error { using Error::Error; };

// configuration / cli
class ConfigError : public Error { using Error::Error; };

}  // namespace gridres
