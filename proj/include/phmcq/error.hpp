#pragma once

#include <stdexcept>
#include <string>

namespace phmcq {

enum class ErrorKind {
    input,       // malformed model, bad arguments, I/O
    assumption,  // the model violates a structural assumption of the solver
    numerical,   // a numerical routine failed or lost accuracy
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail_input(const std::string& what) { throw Error(ErrorKind::input, what); }
[[noreturn]] inline void fail_assumption(const std::string& what) { throw Error(ErrorKind::assumption, what); }
[[noreturn]] inline void fail_numerical(const std::string& what) { throw Error(ErrorKind::numerical, what); }

}  // namespace phmcq
