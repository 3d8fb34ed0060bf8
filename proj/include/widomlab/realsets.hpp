#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "widomlab/error.hpp"

namespace widomlab {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    [[nodiscard]] double length() const noexcept { return hi - lo; }
    [[nodiscard]] double mid() const noexcept { return 0.5 * (lo + hi); }
    [[nodiscard]] double rad() const noexcept { return 0.5 * (hi - lo); }
    [[nodiscard]] bool contains(double x, double slack = 0.0) const noexcept {
        return x >= lo - slack && x <= hi + slack;
    }
    friend bool operator==(const Interval&, const Interval&) = default;
};

/// Relative width below which a band is treated as degenerate.
inline constexpr double kBandWidthFloor = 1e-13;

/// A compact subset of the real line stored as ordered, pairwise disjoint
/// closed bands. Construct through normalize(); the constructor is private so
/// every instance satisfies the ordering invariant.
class RealCompactSet {
public:
    [[nodiscard]] std::span<const Interval> bands() const noexcept { return bands_; }
    [[nodiscard]] std::size_t size() const noexcept { return bands_.size(); }
    [[nodiscard]] std::size_t gap_count() const noexcept { return bands_.size() - 1; }
    [[nodiscard]] const Interval& band(std::size_t i) const { return bands_.at(i); }
    [[nodiscard]] Interval hull() const noexcept { return {bands_.front().lo, bands_.back().hi}; }
    [[nodiscard]] Interval gap(std::size_t i) const { return {bands_.at(i).hi, bands_.at(i + 1).lo}; }

    [[nodiscard]] double total_length() const noexcept {
        double s = 0.0;
        for (const auto& b : bands_) s += b.length();
        return s;
    }

    /// Index of the band containing x (within slack), or -1.
    [[nodiscard]] int band_index(double x, double slack = 0.0) const noexcept {
        auto it = std::lower_bound(bands_.begin(), bands_.end(), x,
                                   [&](const Interval& b, double v) { return b.hi + slack < v; });
        if (it == bands_.end() || !it->contains(x, slack)) return -1;
        return static_cast<int>(it - bands_.begin());
    }
    [[nodiscard]] bool contains(double x, double slack = 0.0) const noexcept {
        return band_index(x, slack) >= 0;
    }

    /// Distance from a real point to the set.
    [[nodiscard]] double distance(double x) const noexcept {
        double d = std::numeric_limits<double>::infinity();
        for (const auto& b : bands_) {
            if (b.contains(x)) return 0.0;
            d = std::min({d, std::abs(x - b.lo), std::abs(x - b.hi)});
        }
        return d;
    }

    /// All band endpoints in increasing order.
    [[nodiscard]] std::vector<double> endpoints() const {
        std::vector<double> e;
        e.reserve(2 * bands_.size());
        for (const auto& b : bands_) {
            e.push_back(b.lo);
            e.push_back(b.hi);
        }
        return e;
    }

    /// True when every band of `other` lies inside some band of *this (within slack).
    [[nodiscard]] bool includes(const RealCompactSet& other, double slack = 0.0) const noexcept {
        return std::all_of(other.bands_.begin(), other.bands_.end(), [&](const Interval& b) {
            int i = band_index(b.lo, slack);
            return i >= 0 && bands_[static_cast<std::size_t>(i)].contains(b.hi, slack);
        });
    }

    friend bool operator==(const RealCompactSet&, const RealCompactSet&) = default;

    friend RealCompactSet normalize(std::vector<Interval> raw);

private:
    explicit RealCompactSet(std::vector<Interval> b) : bands_(std::move(b)) {}
    std::vector<Interval> bands_;
};

/// Sorts, merges overlapping or touching bands, and drops bands narrower than
/// the width floor (relative to the hull).
inline RealCompactSet normalize(std::vector<Interval> raw) {
    if (raw.empty()) throw Error("empty-input", "normalize needs at least one band");
    for (auto& b : raw) {
        if (!std::isfinite(b.lo) || !std::isfinite(b.hi))
            throw Error("invalid-band", "band endpoints must be finite");
        if (b.lo > b.hi) std::swap(b.lo, b.hi);
    }
    std::sort(raw.begin(), raw.end(), [](const Interval& a, const Interval& b) {
        return a.lo < b.lo || (a.lo == b.lo && a.hi < b.hi);
    });
    std::vector<Interval> merged;
    for (const auto& b : raw) {
        if (!merged.empty() && b.lo <= merged.back().hi)
            merged.back().hi = std::max(merged.back().hi, b.hi);
        else
            merged.push_back(b);
    }
    double hull = merged.back().hi - merged.front().lo;
    double floor = kBandWidthFloor * std::max(hull, std::numeric_limits<double>::min());
    std::erase_if(merged, [&](const Interval& b) { return b.length() <= floor; });
    if (merged.empty()) throw Error("degenerate", "all bands are below the width floor");
    return RealCompactSet(std::move(merged));
}

inline RealCompactSet make_set(std::initializer_list<Interval> bands) {
    return normalize(std::vector<Interval>(bands));
}

/// Symmetric Hausdorff distance between two band unions.
inline double hausdorff_distance(const RealCompactSet& a, const RealCompactSet& b) {
    // dist(., B) restricted to a band of A is piecewise linear; its maximum sits
    // at a band end or at the midpoint of a gap of B clipped into the band.
    auto directed = [](const RealCompactSet& from, const RealCompactSet& to) {
        double worst = 0.0;
        for (const auto& band : from.bands()) {
            worst = std::max({worst, to.distance(band.lo), to.distance(band.hi)});
            for (std::size_t g = 0; g + 1 < to.size(); ++g) {
                double m = std::clamp(to.gap(g).mid(), band.lo, band.hi);
                worst = std::max(worst, to.distance(m));
            }
        }
        return worst;
    };
    return std::max(directed(a, b), directed(b, a));
}

inline void to_json(nlohmann::json& j, const RealCompactSet& k) {
    auto arr = nlohmann::json::array();
    for (const auto& b : k.bands()) arr.push_back({b.lo, b.hi});
    j = nlohmann::json{{"bands", arr}};
}

inline RealCompactSet set_from_json(const nlohmann::json& j) {
    if (!j.contains("bands") || !j.at("bands").is_array())
        throw Error("schema", "set JSON needs a \"bands\" array");
    std::vector<Interval> raw;
    for (const auto& b : j.at("bands")) {
        if (!b.is_array() || b.size() != 2) throw Error("schema", "each band is [lo, hi]");
        raw.push_back({b[0].get<double>(), b[1].get<double>()});
    }
    return normalize(std::move(raw));
}

}  // namespace widomlab
