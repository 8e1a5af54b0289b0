#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace mmg {

// One checked inequality with both sides recorded, so reports are
// auditable without re-running the computation.
struct Assertion {
    std::string name;   // semantic slug, e.g. "restriction-mass-bound"
    double lhs = 0.0;
    std::string op;     // "<=", "<", "==" (with tolerance), ">="
    double rhs = 0.0;
    double slack = 0.0; // rhs - lhs signed so pass <=> slack >= -tol
    bool pass = false;
};

class AssertionLog {
  public:
    bool check_le(const std::string& name, double lhs, double rhs, double tol = 1e-9) {
        Assertion a{name, lhs, "<=", rhs, rhs - lhs, lhs <= rhs + tol};
        all_.push_back(a);
        ok_ = ok_ && a.pass;
        return a.pass;
    }
    bool check_ge(const std::string& name, double lhs, double rhs, double tol = 1e-9) {
        Assertion a{name, lhs, ">=", rhs, lhs - rhs, lhs + tol >= rhs};
        all_.push_back(a);
        ok_ = ok_ && a.pass;
        return a.pass;
    }
    bool check_eq(const std::string& name, double lhs, double rhs, double tol = 1e-9) {
        double d = lhs > rhs ? lhs - rhs : rhs - lhs;
        Assertion a{name, lhs, "==", rhs, -d, d <= tol};
        all_.push_back(a);
        ok_ = ok_ && a.pass;
        return a.pass;
    }
    bool check_true(const std::string& name, bool cond) {
        Assertion a{name, cond ? 1.0 : 0.0, "==", 1.0, 0.0, cond};
        all_.push_back(a);
        ok_ = ok_ && cond;
        return cond;
    }

    bool ok() const { return ok_; }
    const std::vector<Assertion>& entries() const { return all_; }

    nlohmann::json to_json() const {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& a : all_) {
            arr.push_back({{"name", a.name},
                           {"lhs", a.lhs},
                           {"op", a.op},
                           {"rhs", a.rhs},
                           {"slack", a.slack},
                           {"pass", a.pass}});
        }
        return arr;
    }

  private:
    std::vector<Assertion> all_;
    bool ok_ = true;
};

}  // namespace mmg
