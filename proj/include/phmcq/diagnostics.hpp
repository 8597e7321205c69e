#pragma once

#include <string>
#include <vector>

namespace phmcq {

enum class Status { pass, warn, fail };

const char* to_string(Status s) noexcept;

/// One named check: a measured value against a threshold.
struct Check {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    Status status = Status::pass;
    std::string note;
};

class Diagnostics {
public:
    void add(Check c) { checks_.push_back(std::move(c)); }

    /// value <= limit passes, anything else (NaN included) fails.
    void upper(std::string name, double value, double limit, std::string note = {});
    /// value >= limit passes; fail_limit < value < limit warns.
    void lower(std::string name, double value, double limit, double fail_limit, std::string note = {});
    void info(std::string name, double value, std::string note);

    void append(const Diagnostics& other) { checks_.insert(checks_.end(), other.checks_.begin(), other.checks_.end()); }

    const std::vector<Check>& checks() const noexcept { return checks_; }
    const Check* find(const std::string& name) const;
    Status overall() const noexcept;
    /// First failing check, or nullptr.
    const Check* first_failure() const;
    /// "name (note, value x); ..." over every failing check.
    std::string failure_summary() const;

    std::string to_text() const;

private:
    std::vector<Check> checks_;
};

}  // namespace phmcq
