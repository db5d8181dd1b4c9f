#pragma once

#include <string>

#include "core.hpp"

namespace bdsde {

// Where the generator is evaluated inside a backward step.
//   explicit_: f at (t_{i+1}, X_{i+1}, Y_{i+1}, Z_i), g at (t_{i+1}, X_{i+1}, Y_{i+1}, Z_{i+1})
//   implicit_f: f moved to (t_i, X_i, Y_i, Z_i), solved by fixed point
//   implicit_fg: f and g both at (t_i, X_i, Y_i, Z_i)
enum class Scheme { explicit_, implicit_f, implicit_fg };

inline const char* to_string(Scheme s) {
    switch (s) {
        case Scheme::explicit_: return "explicit";
        case Scheme::implicit_f: return "implicit-f";
        case Scheme::implicit_fg: return "implicit-fg";
    }
    return "?";
}

inline Scheme scheme_from(const std::string& s) {
    if (s == "explicit") return Scheme::explicit_;
    if (s == "implicit-f") return Scheme::implicit_f;
    if (s == "implicit-fg") return Scheme::implicit_fg;
    throw Error("unknown scheme '" + s + "'");
}

}  // namespace bdsde
