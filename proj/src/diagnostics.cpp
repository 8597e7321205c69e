#include "phmcq/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace phmcq {

const char* to_string(Status s) noexcept {
    switch (s) {
        case Status::pass: return "pass";
        case Status::warn: return "warn";
        case Status::fail: return "fail";
    }
    return "?";
}

void Diagnostics::upper(std::string name, double value, double limit, std::string note) {
    const Status st = (value <= limit) ? Status::pass : Status::fail;
    checks_.push_back({std::move(name), value, limit, st, std::move(note)});
}

void Diagnostics::lower(std::string name, double value, double limit, double fail_limit, std::string note) {
    Status st = Status::pass;
    if (!(value >= limit)) st = (value > fail_limit) ? Status::warn : Status::fail;
    checks_.push_back({std::move(name), value, limit, st, std::move(note)});
}

void Diagnostics::info(std::string name, double value, std::string note) {
    checks_.push_back({std::move(name), value, 0.0, Status::pass, std::move(note)});
}

const Check* Diagnostics::find(const std::string& name) const {
    const auto it = std::find_if(checks_.begin(), checks_.end(), [&](const Check& c) { return c.name == name; });
    return it == checks_.end() ? nullptr : &*it;
}

Status Diagnostics::overall() const noexcept {
    Status s = Status::pass;
    for (const auto& c : checks_) {
        if (c.status == Status::fail) return Status::fail;
        if (c.status == Status::warn) s = Status::warn;
    }
    return s;
}

const Check* Diagnostics::first_failure() const {
    const auto it = std::find_if(checks_.begin(), checks_.end(), [](const Check& c) { return c.status == Status::fail; });
    return it == checks_.end() ? nullptr : &*it;
}

std::string Diagnostics::failure_summary() const {
    std::string out;
    char buf[64];
    for (const Check& c : checks_) {
        if (c.status != Status::fail) continue;
        if (!out.empty()) out += "; ";
        std::snprintf(buf, sizeof buf, "%.3e", c.value);
        out += c.name + " (" + c.note + ", value " + buf + ")";
    }
    return out;
}

std::string Diagnostics::to_text() const {
    std::string out;
    char buf[128];
    for (const auto& c : checks_) {
        std::snprintf(buf, sizeof buf, "%-4s  %-32s %12.4e", to_string(c.status), c.name.c_str(), c.value);
        out += buf;
        if (c.threshold != 0.0) {
            std::snprintf(buf, sizeof buf, "  (threshold %.1e)", c.threshold);
            out += buf;
        }
        if (!c.note.empty()) out += "  " + c.note;
        out += '\n';
    }
    out += std::string("overall: ") + to_string(overall()) + '\n';
    return out;
}

}  // namespace phmcq
