#pragma once

#include <stdexcept>
#include <string>

namespace socsense {

/// Base for every domain error raised by the library. The CLI maps these to
/// exit status 1.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    virtual const char* kind() const noexcept { return "domain_error"; }
};

/// A precondition on an argument was violated (bad dimensions, probabilities
/// outside [0,1], unknown ids, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "invalid_argument"; }
};

/// Malformed input text. Carries a 1-based line and column when known.
class ParseError : public Error {
public:
    ParseError(const std::string& what, int line = 0, int column = 0)
        : Error(decorate(what, line, column)), line_(line), column_(column) {}

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }
    const char* kind() const noexcept override { return "parse_error"; }

private:
    static std::string decorate(const std::string& what, int line, int column) {
        if (line <= 0) return what;
        std::string s = "line " + std::to_string(line);
        if (column > 0) s += ", column " + std::to_string(column);
        return s + ": " + what;
    }

    int line_;
    int column_;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InvalidArgument(msg);
}

} // namespace detail
} // namespace socsense
