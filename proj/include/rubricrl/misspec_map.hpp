#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace rubricrl {

enum class MapKind { Identity, Reversed, TopWrong, WorstWrong, Custom };

// Misspecification map f from gold reward r* in [0,1] to proxy reward r.
//
// The four built-in kinds are measure-preserving involutions of [0,1]:
//   Identity    f(r) = r
//   Reversed    f(r) = 1 - r
//   TopWrong    f(r) = r on [0, 1-c], 2 - c - r above    (top c reversed)
//   WorstWrong  f(r) = c - r on [0, c], r above           (bottom c reversed)
//
// Custom maps can be applied but not inverted; anything needing f^-1
// rejects them with UnsupportedMapError.
class MisspecMap {
public:
    static MisspecMap identity();
    static MisspecMap reversed();
    static MisspecMap top_wrong(double c);
    static MisspecMap worst_wrong(double c);
    static MisspecMap custom(std::string name, std::function<double(double)> fn);

    // Parses "identity", "reversed", "top-wrong", "worst-wrong". `c` is
    // required for the last two and must be absent for the first two.
    static MisspecMap from_name(const std::string& name, std::optional<double> c);

    MapKind kind() const { return kind_; }
    std::optional<double> param_c() const { return c_; }
    bool invertible() const { return kind_ != MapKind::Custom; }

    // Canonical CLI / CSV name.
    std::string name() const;

    // Interior points where f changes piece (a kink or a jump).
    std::vector<double> breakpoints() const;

private:
    MisspecMap(MapKind kind, std::optional<double> c) : kind_(kind), c_(c) {}

    MapKind kind_;
    std::optional<double> c_;
    std::string custom_name_;
    std::function<double(double)> custom_fn_;

    friend double apply_map(const MisspecMap& m, double r_star);
};

// f(r*). Throws DomainError for r* outside [0,1].
double apply_map(const MisspecMap& m, double r_star);

// f^-1(u). Built-in maps are involutions so this equals apply_map except
// for the identity. Throws UnsupportedMapError for custom maps.
double invert_map(const MisspecMap& m, double u);

} // namespace rubricrl
