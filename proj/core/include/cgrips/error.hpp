#pragma once

#include <stdexcept>
#include <string>

namespace cgrips {

// Base of every error the library throws. The category drives CLI exit codes.
class Error : public std::runtime_error {
public:
    enum class Category { input, pipeline, io };

    Error(Category category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    Category category() const noexcept { return category_; }

private:
    Category category_;
};

// Malformed or invalid user input: bad rows, bad config values, bad layouts.
class InputError : public Error {
public:
    explicit InputError(const std::string& what) : Error(Category::input, what) {}
};

// A stage of the transform/classify pipeline could not complete.
class PipelineError : public Error {
public:
    explicit PipelineError(const std::string& what) : Error(Category::pipeline, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(Category::io, what) {}
};

}  // namespace cgrips
