#include "rubricrl/misspec_map.hpp"

#include "rubricrl/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rubricrl {

namespace {

void check_unit(double x, const char* what) {
    if (!(x >= 0.0 && x <= 1.0)) {
        std::ostringstream os;
        os << what << " must lie in [0,1], got " << x;
        throw DomainError(os.str());
    }
}

double checked_c(double c) {
    if (!(c > 0.0 && c < 1.0)) {
        std::ostringstream os;
        os << "map parameter c must lie strictly inside (0,1), got " << c;
        throw DomainError(os.str());
    }
    return c;
}

} // namespace

MisspecMap MisspecMap::identity() { return {MapKind::Identity, std::nullopt}; }

MisspecMap MisspecMap::reversed() { return {MapKind::Reversed, std::nullopt}; }

MisspecMap MisspecMap::top_wrong(double c) { return {MapKind::TopWrong, checked_c(c)}; }

MisspecMap MisspecMap::worst_wrong(double c) { return {MapKind::WorstWrong, checked_c(c)}; }

MisspecMap MisspecMap::custom(std::string name, std::function<double(double)> fn) {
    MisspecMap m(MapKind::Custom, std::nullopt);
    m.custom_name_ = std::move(name);
    m.custom_fn_ = std::move(fn);
    return m;
}

MisspecMap MisspecMap::from_name(const std::string& name, std::optional<double> c) {
    if (name == "identity" || name == "reversed") {
        if (c) {
            throw DomainError("mapping '" + name + "' takes no c parameter");
        }
        return name == "identity" ? identity() : reversed();
    }
    if (name == "top-wrong" || name == "worst-wrong") {
        if (!c) {
            throw DomainError("mapping '" + name + "' requires a c parameter");
        }
        return name == "top-wrong" ? top_wrong(*c) : worst_wrong(*c);
    }
    throw DomainError("unknown mapping '" + name + "'");
}

std::string MisspecMap::name() const {
    switch (kind_) {
    case MapKind::Identity: return "identity";
    case MapKind::Reversed: return "reversed";
    case MapKind::TopWrong: return "top-wrong";
    case MapKind::WorstWrong: return "worst-wrong";
    case MapKind::Custom: return custom_name_;
    }
    return {};
}

std::vector<double> MisspecMap::breakpoints() const {
    switch (kind_) {
    case MapKind::TopWrong: return {1.0 - *c_};
    case MapKind::WorstWrong: return {*c_};
    default: return {};
    }
}

double apply_map(const MisspecMap& m, double r_star) {
    check_unit(r_star, "gold reward");
    switch (m.kind_) {
    case MapKind::Identity: return r_star;
    case MapKind::Reversed: return 1.0 - r_star;
    case MapKind::TopWrong: {
        // Reversed segment is closed at 1-c so that f is a bijection of
        // [0,1]; with a half-open segment f(1) = f(1-c) and 1 has no preimage.
        // Written as b + (1 - r) so rounding never pushes the image below b
        // into the identity segment.
        const double b = 1.0 - *m.c_;
        return r_star < b ? r_star : std::min(b + (1.0 - r_star), 1.0);
    }
    case MapKind::WorstWrong: {
        const double c = *m.c_;
        return r_star <= c ? c - r_star : r_star;
    }
    case MapKind::Custom: {
        const double r = m.custom_fn_(r_star);
        check_unit(r, "custom map output");
        return r;
    }
    }
    return r_star;
}

double invert_map(const MisspecMap& m, double u) {
    if (!m.invertible()) {
        throw UnsupportedMapError("map '" + m.name() + "' has no registered inverse");
    }
    check_unit(u, "proxy reward");
    // Every built-in map is an involution.
    return apply_map(m, u);
}

} // namespace rubricrl
