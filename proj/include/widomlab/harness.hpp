#pragma once

// Experiment runner: JSON config in, CSV / JSON / SVG files and a manifest out.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "widomlab/cantor.hpp"
#include "widomlab/chebyshev.hpp"
#include "widomlab/error.hpp"
#include "widomlab/orthopoly.hpp"
#include "widomlab/potential.hpp"
#include "widomlab/realsets.hpp"
#include "widomlab/weights.hpp"

namespace widomlab::harness {

inline constexpr const char* kVersion = "1.0.0";
inline const std::vector<std::string> kKinds{"capacity-table", "cheb-sweep",  "opoly-sweep",    "bounds-audit",
                                             "bernstein",      "cantor",      "conjecture-scan"};

inline std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// ---------------------------------------------------------------------------
// Config

struct ExperimentConfig {
    std::string kind;
    std::string name;
    std::string bytes;  // the config file as read; hashed into the manifest
    nlohmann::json raw;
    std::vector<RealCompactSet> sets;
    std::vector<WeightExpr> weights;
    std::vector<int> degrees;
    double tol = 1e-10;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    int threads = 0;  // 0: hardware concurrency
};

namespace detail {

[[noreturn]] inline void schema(const std::string& what) { throw Error("schema", what); }

inline std::vector<int> degree_list(const nlohmann::json& j) {
    std::vector<int> out;
    if (j.is_array()) {
        for (const auto& v : j) {
            if (!v.is_number_integer()) schema("degrees must be integers");
            out.push_back(v.get<int>());
        }
    } else if (j.is_object()) {
        int from = j.value("from", 1), to = j.at("to").get<int>(), step = j.value("step", 1);
        if (step < 1) schema("degree step must be positive");
        for (int n = from; n <= to; n += step) out.push_back(n);
    } else {
        schema("degrees is a list or {from, to, step}");
    }
    if (!std::is_sorted(out.begin(), out.end())) schema("degrees must increase");
    return out;
}

}  // namespace detail

inline ExperimentConfig parse_config(const std::string& bytes, const std::string& kind_hint = "") {
    ExperimentConfig c;
    c.bytes = bytes;
    try {
        c.raw = nlohmann::json::parse(bytes);
    } catch (const nlohmann::json::parse_error& e) {
        detail::schema(std::string("config is not valid JSON: ") + e.what());
    }
    const auto& j = c.raw;
    if (!j.is_object()) detail::schema("config must be a JSON object");
    c.kind = j.value("kind", kind_hint);
    if (!kind_hint.empty() && c.kind != kind_hint) detail::schema("config kind '" + c.kind + "' does not match '" + kind_hint + "'");
    if (std::find(kKinds.begin(), kKinds.end(), c.kind) == kKinds.end()) detail::schema("unknown kind '" + c.kind + "'");
    c.name = j.value("name", c.kind);
    try {
        if (j.contains("set")) c.sets.push_back(set_from_json(j["set"]));
        if (j.contains("sets"))
            for (const auto& s : j["sets"]) c.sets.push_back(set_from_json(s));
        if (j.contains("weight")) c.weights.push_back(weight_from_json(j["weight"]));
        if (j.contains("weights"))
            for (const auto& w : j["weights"]) c.weights.push_back(weight_from_json(w));
        if (j.contains("degrees")) c.degrees = detail::degree_list(j["degrees"]);
        c.tol = j.value("tol", c.tol);
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        c.out = j.value("out", c.out);
        c.threads = j.value("threads", 0);
    } catch (const nlohmann::json::exception& e) {
        detail::schema(e.what());
    }
    if (!(c.tol > 0.0)) detail::schema("tol must be positive");
    bool needs_set = c.kind != "cantor" && c.kind != "conjecture-scan";
    if (needs_set && c.sets.empty()) detail::schema(c.kind + " needs \"set\" or \"sets\"");
    bool needs_weight = c.kind == "cheb-sweep" || c.kind == "opoly-sweep" || c.kind == "bounds-audit" || c.kind == "bernstein";
    if (needs_weight && c.weights.empty()) detail::schema(c.kind + " needs \"weight\" or \"weights\"");
    if (needs_weight && c.degrees.empty()) detail::schema(c.kind + " needs \"degrees\"");
    if (c.kind == "cantor" && !j.contains("gamma")) detail::schema("cantor needs \"gamma\"");
    return c;
}

// ---------------------------------------------------------------------------
// Tables

using Cell = std::variant<std::monostate, long long, double, std::string>;

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<Cell>> rows;

    [[nodiscard]] bool empty() const { return rows.empty(); }
};

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string o = "\"";
    for (char ch : s) {
        if (ch == '"') o += '"';
        o += ch;
    }
    return o + "\"";
}

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string to_csv(const Table& t) {
    std::string o;
    for (std::size_t i = 0; i < t.header.size(); ++i) o += (i ? "," : "") + csv_escape(t.header[i]);
    o += "\n";
    for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (i) o += ",";
            std::visit(
                [&](const auto& v) {
                    using T = std::decay_t<decltype(v)>;
                    if constexpr (std::is_same_v<T, long long>) o += std::to_string(v);
                    else if constexpr (std::is_same_v<T, double>) o += format_double(v);
                    else if constexpr (std::is_same_v<T, std::string>) o += csv_escape(v);
                },
                r[i]);
        }
        o += "\n";
    }
    return o;
}

// ---------------------------------------------------------------------------
// SVG line plots

struct Series {
    std::string label;
    std::vector<double> x, y;
    bool dashed = false;
};

struct Plot {
    std::string title, xlabel, ylabel;
    std::vector<Series> series;
};

inline std::string xml_escape(const std::string& s) {
    std::string o;
    for (char c : s) {
        switch (c) {
            case '&': o += "&amp;"; break;
            case '<': o += "&lt;"; break;
            case '>': o += "&gt;"; break;
            case '"': o += "&quot;"; break;
            default: o += c;
        }
    }
    return o;
}

/// Static SVG; identical input gives identical bytes.
inline std::optional<std::string> render_svg(const Plot& p) {
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    std::size_t points = 0;
    for (const auto& s : p.series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
            ++points;
        }
    if (points == 0) return std::nullopt;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) {
        y0 -= 0.5;
        y1 += 0.5;
    }
    double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    const double W = 640, H = 400, L = 70, R = 160, T = 40, B = 50;
    auto sx = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto sy = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };
    auto tick = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4g", v);
        return std::string(buf);
    };
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n";
    o << "<rect x=\"0\" y=\"0\" width=\"640\" height=\"400\" fill=\"white\"/>\n";
    o << "<text x=\"" << num(W / 2 - R / 2 + L / 2) << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
      << xml_escape(p.title) << "</text>\n";
    o << "<line x1=\"" << num(L) << "\" y1=\"" << num(H - B) << "\" x2=\"" << num(W - R) << "\" y2=\"" << num(H - B)
      << "\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << num(L) << "\" y1=\"" << num(T) << "\" x2=\"" << num(L) << "\" y2=\"" << num(H - B)
      << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
        o << "<text x=\"" << num(sx(xv)) << "\" y=\"" << num(H - B + 16)
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << tick(xv) << "</text>\n";
        o << "<text x=\"" << num(L - 6) << "\" y=\"" << num(sy(yv) + 3)
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << tick(yv) << "</text>\n";
    }
    o << "<text x=\"" << num((L + W - R) / 2) << "\" y=\"" << num(H - 12)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(p.xlabel) << "</text>\n";
    o << "<text x=\"16\" y=\"" << num((T + H - B) / 2) << "\" transform=\"rotate(-90 16 " << num((T + H - B) / 2)
      << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(p.ylabel) << "</text>\n";
    for (std::size_t k = 0; k < p.series.size(); ++k) {
        const auto& s = p.series[k];
        const char* col = palette[k % 7];
        o << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\"" << (s.dashed ? " stroke-dasharray=\"5,4\"" : "")
          << " points=\"";
        bool first = true;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            o << (first ? "" : " ") << num(sx(s.x[i])) << "," << num(sy(s.y[i]));
            first = false;
        }
        o << "\"/>\n";
        double ly = T + 14 + 18 * static_cast<double>(k);
        o << "<line x1=\"" << num(W - R + 12) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(W - R + 36) << "\" y2=\"" << num(ly)
          << "\" stroke=\"" << col << "\" stroke-width=\"1.5\"" << (s.dashed ? " stroke-dasharray=\"5,4\"" : "") << "/>\n";
        o << "<text x=\"" << num(W - R + 42) << "\" y=\"" << num(ly + 4) << "\" font-family=\"sans-serif\" font-size=\"11\">"
          << xml_escape(s.label) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

// ---------------------------------------------------------------------------
// Manifest

struct Failure {
    std::string row;
    std::string error;
};

struct RunManifest {
    std::string config_hash;
    std::string version = kVersion;
    std::string kind;
    std::string name;
    std::string started, finished;
    std::vector<std::string> files;
    std::vector<Failure> failures;
    std::vector<std::string> warnings;

    /// Without timestamps the manifest is a pure function of the config.
    [[nodiscard]] nlohmann::json to_json(bool with_timestamps = true) const {
        nlohmann::json f = nlohmann::json::array();
        for (const auto& x : failures) f.push_back({{"row", x.row}, {"error", x.error}});
        nlohmann::json j{{"config_hash", config_hash}, {"version", version}, {"kind", kind}, {"name", name},
                         {"files", files},             {"failures", f},      {"warnings", warnings}};
        if (with_timestamps) {
            j["started"] = started;
            j["finished"] = finished;
        }
        return j;
    }
};

inline std::string utc_now() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// ---------------------------------------------------------------------------
// Row-parallel execution

/// Runs f(0..count-1) on a thread pool; results keep index order.
template <class R>
std::vector<R> parallel_rows(std::size_t count, int threads, const std::function<R(std::size_t)>& f) {
    std::vector<R> out(count);
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    std::size_t nt = threads > 0 ? static_cast<std::size_t>(threads) : hw;
    nt = std::max<std::size_t>(1, std::min(nt, count));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) out[i] = f(i);
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < nt; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return out;
}

struct RowResult {
    std::vector<std::vector<Cell>> rows;
    std::string error;
    nlohmann::json results = nlohmann::json::array();
};

inline std::string bands_label(const RealCompactSet& k) {
    std::string s;
    for (const auto& b : k.bands()) s += (s.empty() ? "" : ";") + format_double(b.lo) + ":" + format_double(b.hi);
    return s;
}

inline Cell opt(double v, bool ok) { return ok ? Cell{v} : Cell{}; }

// ---------------------------------------------------------------------------
// Kinds

class Runner {
public:
    explicit Runner(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
        manifest_.config_hash = hex64(fnv1a(cfg_.bytes));
        manifest_.kind = cfg_.kind;
        manifest_.name = cfg_.name;
    }

    RunManifest run() {
        manifest_.started = utc_now();
        std::filesystem::create_directories(cfg_.out);
        const std::string& k = cfg_.kind;
        if (k == "capacity-table") capacity_table();
        else if (k == "cheb-sweep") cheb_sweep();
        else if (k == "opoly-sweep") opoly_sweep();
        else if (k == "bounds-audit") bounds_audit();
        else if (k == "bernstein") bernstein();
        else if (k == "cantor") cantor();
        else conjecture_scan();
        manifest_.finished = utc_now();
        write_text("manifest.json", manifest_.to_json(true).dump(2) + "\n", false);
        return manifest_;
    }

private:
    ExperimentConfig cfg_;
    RunManifest manifest_;

    [[nodiscard]] MinimaxOptions minimax_options() const {
        MinimaxOptions o;
        o.tol = cfg_.tol;
        return o;
    }

    void write_text(const std::string& file, const std::string& body, bool list = true) {
        std::ofstream f(std::filesystem::path(cfg_.out) / file, std::ios::binary);
        if (!f) throw Error("io", "cannot write " + file);
        f << body;
        if (list) manifest_.files.push_back(file);
    }

    void write_table(const std::string& file, const Table& t) { write_text(file, to_csv(t)); }

    void write_plot(const std::string& file, const Plot& p) {
        auto svg = render_svg(p);
        if (!svg) {
            std::string w = "empty table: no plot " + file;
            std::cerr << "warning: " << w << "\n";
            manifest_.warnings.push_back(w);
            return;
        }
        write_text(file, *svg);
    }

    // Collects rows in index order and records failures.
    Table collect(std::vector<std::string> header, const std::vector<RowResult>& rs,
                  const std::function<std::string(std::size_t)>& key) {
        Table t{std::move(header), {}};
        for (std::size_t i = 0; i < rs.size(); ++i) {
            for (const auto& r : rs[i].rows) t.rows.push_back(r);
            if (!rs[i].error.empty()) manifest_.failures.push_back({key(i), rs[i].error});
        }
        return t;
    }

    struct Triple {
        std::size_t s, w;
        int n;
    };
    [[nodiscard]] std::vector<Triple> grid() const {
        std::vector<Triple> g;
        for (std::size_t s = 0; s < cfg_.sets.size(); ++s)
            for (std::size_t w = 0; w < cfg_.weights.size(); ++w)
                for (int n : cfg_.degrees) g.push_back({s, w, n});
        return g;
    }
    static std::string key(const Triple& t) {
        return "set=" + std::to_string(t.s) + " weight=" + std::to_string(t.w) + " n=" + std::to_string(t.n);
    }

    void capacity_table() {
        auto rs = parallel_rows<RowResult>(cfg_.sets.size(), cfg_.threads, [&](std::size_t i) {
            RowResult r;
            const auto& k = cfg_.sets[i];
            std::vector<Cell> row{static_cast<long long>(i), static_cast<long long>(k.size()), bands_label(k)};
            try {
                EquilibriumMeasure m(k);
                row.insert(row.end(), {m.capacity(), m.log_capacity(), m.log_capacity_error()});
                // Closed forms: one band, or a symmetric pair (preimage of an interval under x^2).
                Cell closed;
                if (k.size() == 1) closed = k.hull().length() / 4.0;
                else if (k.size() == 2 && std::abs(k.band(0).lo + k.band(1).hi) < 1e-14 &&
                         std::abs(k.band(0).hi + k.band(1).lo) < 1e-14) {
                    double a = k.band(1).lo, b = k.band(1).hi;
                    closed = std::sqrt((b * b - a * a) / 4.0);
                }
                row.push_back(closed);
                row.push_back(std::string());
            } catch (const std::exception& e) {
                r.error = e.what();
                row.insert(row.end(), {Cell{}, Cell{}, Cell{}, Cell{}, r.error});
            }
            r.rows.push_back(std::move(row));
            return r;
        });
        write_table("capacity_table.csv",
                    collect({"set", "bands", "intervals", "capacity", "log_capacity", "log_capacity_error", "closed_form", "error"},
                            rs, [](std::size_t i) { return "set=" + std::to_string(i); }));
    }

    void cheb_sweep() {
        auto g = grid();
        auto rs = parallel_rows<RowResult>(g.size(), cfg_.threads, [&](std::size_t i) {
            RowResult r;
            const auto& t = g[i];
            std::vector<Cell> row{static_cast<long long>(t.s), static_cast<long long>(t.w), static_cast<long long>(t.n)};
            try {
                EquilibriumMeasure m(cfg_.sets[t.s]);
                WidomBracket b = widom_infty(m, cfg_.weights[t.w], t.n, minimax_options());
                double s = szego_factor(m, cfg_.weights[t.w]).value;
                row.insert(row.end(), {b.minimax.t_lower, b.minimax.t_upper, b.lo, b.hi, s, 2 * s, b.minimax.rel_gap(),
                                       static_cast<long long>(b.minimax.iterations), std::string()});
            } catch (const std::exception& e) {
                r.error = e.what();
                for (int c = 0; c < 8; ++c) row.push_back(Cell{});
                row.push_back(r.error);
            }
            r.rows.push_back(std::move(row));
            return r;
        });
        Table t = collect({"set", "weight", "n", "t_lower", "t_upper", "w_lower", "w_upper", "szego", "two_s", "rel_gap",
                           "iterations", "error"},
                          rs, [&](std::size_t i) { return key(g[i]); });
        write_table("cheb_sweep.csv", t);
        plot_groups(t, "cheb", "W_inf,n", 6, 8);
    }

    // One SVG per (set, weight): column `ycol` against n, with the 2S column dashed.
    void plot_groups(const Table& t, const std::string& prefix, const std::string& ylabel, std::size_t ycol,
                     std::size_t refcol) {
        for (std::size_t s = 0; s < cfg_.sets.size(); ++s)
            for (std::size_t w = 0; w < cfg_.weights.size(); ++w) {
                Series val{ylabel, {}, {}}, ref{"2S", {}, {}, true};
                for (const auto& r : t.rows) {
                    if (std::get<long long>(r[0]) != static_cast<long long>(s) ||
                        std::get<long long>(r[1]) != static_cast<long long>(w))
                        continue;
                    double n = static_cast<double>(std::get<long long>(r[2]));
                    if (auto* v = std::get_if<double>(&r[ycol])) {
                        val.x.push_back(n);
                        val.y.push_back(*v);
                    }
                    if (auto* v = std::get_if<double>(&r[refcol])) {
                        ref.x.push_back(n);
                        ref.y.push_back(*v);
                    }
                }
                Plot p{cfg_.name + " set " + std::to_string(s) + " weight " + std::to_string(w), "n", ylabel, {val, ref}};
                write_plot(prefix + "_s" + std::to_string(s) + "_w" + std::to_string(w) + ".svg", p);
            }
    }

    void opoly_sweep() {
        std::size_t groups = cfg_.sets.size() * cfg_.weights.size();
        int nmax = cfg_.degrees.back();
        struct Out {
            RowResult rows;
            Table rec;
        };
        auto rs = parallel_rows<Out>(groups, cfg_.threads, [&](std::size_t i) {
            Out o;
            std::size_t s = i / cfg_.weights.size(), w = i % cfg_.weights.size();
            o.rec.header = {"k", "alpha", "beta", "log_norm"};
            try {
                EquilibriumMeasure m(cfg_.sets[s]);
                RecurrenceTable t = recurrence(m, cfg_.weights[w], nmax);
                double sz = szego_factor(m, cfg_.weights[w]).value;
                for (int n : cfg_.degrees) {
                    L2Widom v = widom_2(m, t, n);
                    o.rows.rows.push_back({static_cast<long long>(s), static_cast<long long>(w), static_cast<long long>(n),
                                           v.value, v.log_value, sz, 2 * sz, std::abs(v.value - 2 * sz), std::string()});
                }
                for (std::size_t k = 0; k < t.log_norm.size(); ++k)
                    o.rec.rows.push_back({static_cast<long long>(k), t.alpha[k], t.beta[k], t.log_norm[k]});
            } catch (const std::exception& e) {
                o.rows.error = e.what();
                o.rows.rows.push_back({static_cast<long long>(s), static_cast<long long>(w), Cell{}, Cell{}, Cell{}, Cell{},
                                       Cell{}, Cell{}, o.rows.error});
            }
            return o;
        });
        std::vector<RowResult> rows;
        for (auto& o : rs) rows.push_back(o.rows);
        Table t = collect({"set", "weight", "n", "w2_squared", "log_w2_squared", "szego", "two_s", "abs_diff", "error"}, rows,
                          [&](std::size_t i) {
                              return "set=" + std::to_string(i / cfg_.weights.size()) +
                                     " weight=" + std::to_string(i % cfg_.weights.size());
                          });
        // Failed groups carry no n; keep them out of the numeric plots.
        write_table("opoly_sweep.csv", t);
        for (std::size_t i = 0; i < rs.size(); ++i)
            if (!rs[i].rec.empty())
                write_table("recurrence_s" + std::to_string(i / cfg_.weights.size()) + "_w" +
                                std::to_string(i % cfg_.weights.size()) + ".csv",
                            rs[i].rec);
        Table numeric{t.header, {}};
        for (const auto& r : t.rows)
            if (std::holds_alternative<long long>(r[2])) numeric.rows.push_back(r);
        plot_groups(numeric, "opoly", "[W_2,n]^2", 3, 6);
    }

    void bounds_audit() {
        auto g = grid();
        bool l2 = cfg_.raw.value("l2", true);
        auto rs = parallel_rows<RowResult>(g.size(), cfg_.threads, [&](std::size_t i) {
            RowResult r;
            const auto& t = g[i];
            try {
                EquilibriumMeasure m(cfg_.sets[t.s]);
                const WeightExpr& w = cfg_.weights[t.w];
                SzegoResult s = szego_factor(m, w);
                auto add = [&](const std::vector<BoundReport>& reps, const char* norm) {
                    for (const auto& b : reps) {
                        nlohmann::json j = b;
                        j["set"] = t.s;
                        j["weight"] = t.w;
                        j["norm"] = norm;
                        r.results.push_back(j);
                        r.rows.push_back({static_cast<long long>(t.s), static_cast<long long>(t.w),
                                          static_cast<long long>(t.n), std::string(norm), b.bound_id,
                                          std::string(b.applicable ? "guaranteed" : (b.informational ? "informational" : "not-applicable")),
                                          opt(b.lhs, !std::isnan(b.lhs)), opt(b.rhs, !std::isnan(b.rhs)),
                                          opt(b.margin, !std::isnan(b.margin)),
                                          std::string(b.applicable && b.margin < -1e-7 ? "FAIL" : "ok"), b.reason});
                    }
                };
                WidomBracket wb = widom_infty(m, w, t.n, minimax_options());
                add(bound_audit(m, w, t.n, wb, s), "sup");
                if (l2) add(l2_bound_audit(m, w, t.n, widom_2(m, w, t.n).value, s), "l2");
            } catch (const std::exception& e) {
                r.error = e.what();
                r.rows.push_back({static_cast<long long>(t.s), static_cast<long long>(t.w), static_cast<long long>(t.n),
                                  Cell{}, Cell{}, Cell{}, Cell{}, Cell{}, Cell{}, std::string("error"), r.error});
            }
            return r;
        });
        Table t = collect({"set", "weight", "n", "norm", "bound_id", "status", "lhs", "rhs", "margin", "check", "reason"}, rs,
                          [&](std::size_t i) { return key(g[i]); });
        write_table("bounds_audit.csv", t);
        nlohmann::json results = nlohmann::json::array();
        for (const auto& r : rs)
            for (const auto& j : r.results) results.push_back(j);
        manifest_.files.push_back("report.json");
        nlohmann::json report{{"run", manifest_.to_json(false)}, {"results", results}};
        write_text("report.json", report.dump(2) + "\n", false);
    }

    void bernstein() {
        auto g = grid();
        auto rs = parallel_rows<RowResult>(g.size(), cfg_.threads, [&](std::size_t i) {
            RowResult r;
            const auto& t = g[i];
            std::vector<Cell> row{static_cast<long long>(t.s), static_cast<long long>(t.w), static_cast<long long>(t.n)};
            try {
                EquilibriumMeasure m(cfg_.sets[t.s]);
                WidomBracket b = widom_infty(m, cfg_.weights[t.w], t.n, minimax_options());
                double s = szego_factor(m, cfg_.weights[t.w]).value;
                row.insert(row.end(), {b.lo, b.hi, 2 * s, std::abs(b.mid() - 2 * s), std::string()});
            } catch (const std::exception& e) {
                r.error = e.what();
                row.insert(row.end(), {Cell{}, Cell{}, Cell{}, Cell{}, r.error});
            }
            r.rows.push_back(std::move(row));
            return r;
        });
        Table t = collect({"set", "weight", "n", "w_lower", "w_upper", "two_s", "abs_diff", "error"}, rs,
                          [&](std::size_t i) { return key(g[i]); });
        write_table("bernstein.csv", t);
        // Trend per (set, weight): |W - 2S| decreasing over the degree list.
        Table trend{{"set", "weight", "decreasing", "last_abs_diff"}, {}};
        for (std::size_t s = 0; s < cfg_.sets.size(); ++s)
            for (std::size_t w = 0; w < cfg_.weights.size(); ++w) {
                std::vector<SweepRow> rows;
                for (const auto& r : t.rows) {
                    if (std::get<long long>(r[0]) != static_cast<long long>(s) ||
                        std::get<long long>(r[1]) != static_cast<long long>(w))
                        continue;
                    SweepRow sr;
                    if (auto* d = std::get_if<double>(&r[6])) sr.abs_diff = *d;
                    else sr.error = "failed";
                    rows.push_back(sr);
                }
                bool dec = widomlab::detail::trend_decreasing(rows, 1e-9);
                trend.rows.push_back({static_cast<long long>(s), static_cast<long long>(w), std::string(dec ? "yes" : "no"),
                                      rows.empty() || !rows.back().error.empty() ? Cell{} : Cell{rows.back().abs_diff}});
            }
        write_table("bernstein_trend.csv", trend);
        plot_groups(t, "bernstein", "W_inf,n", 4, 5);
    }

    static GammaSequence gamma_from_json(const nlohmann::json& j) {
        auto tail_from = [](const nlohmann::json& t) {
            GammaTail tl;
            if (t.contains("constant")) tl = {GammaTail::Kind::constant, t["constant"].get<double>(), 0.0};
            else if (t.contains("saturating")) tl = {GammaTail::Kind::saturating, 0.0, t["saturating"].get<double>()};
            else if (t.contains("bounded")) tl = {GammaTail::Kind::bounded, t["bounded"].get<double>(), 0.0};
            else detail::schema("gamma tail is {constant}, {saturating} or {bounded}");
            return tl;
        };
        GammaSequence g;
        try {
            if (j.contains("values")) g.values = j["values"].get<std::vector<double>>();
            if (j.contains("tail")) g.tail = tail_from(j["tail"]);
            else if (!j.contains("values")) g.tail = tail_from(j);
        } catch (const nlohmann::json::exception& e) {
            detail::schema(e.what());
        }
        return g;
    }

    void cantor() {
        const auto& j = cfg_.raw;
        GammaSequence g = gamma_from_json(j.at("gamma"));
        int levels = j.value("levels", 8);
        int numeric_levels = j.value("numeric_levels", 6);
        int numeric_set = j.value("numeric_set_level", numeric_levels);
        int max_numeric_degree = j.value("max_numeric_degree", 16);
        if (levels < 0 || levels > kCantorHorizon) detail::schema("levels must lie in [0, 12]");
        std::optional<EquilibriumMeasure> es;
        std::string es_error;
        try {
            es.emplace(iterate(g, numeric_set).bands);
        } catch (const std::exception& e) {
            es_error = e.what();
        }
        auto rs = parallel_rows<RowResult>(static_cast<std::size_t>(levels + 1), cfg_.threads, [&](std::size_t i) {
            RowResult r;
            int k = static_cast<int>(i);
            std::vector<Cell> row{static_cast<long long>(k)};
            std::string err;
            auto guard = [&](const std::function<Cell()>& f) -> Cell {
                try {
                    return f();
                } catch (const std::exception& e) {
                    if (err.empty()) err = e.what();
                    return Cell{};
                }
            };
            row.push_back(guard([&] { return Cell{capacity_exact(g, k)}; }));
            row.push_back(guard([&]() -> Cell {
                if (k > numeric_levels) return Cell{};
                return EquilibriumMeasure(iterate(g, k).bands).capacity();
            }));
            auto wi = [&] { return widom_infty_exact_bracket(g, k); };
            row.push_back(guard([&] { return Cell{wi().first}; }));
            row.push_back(guard([&] { return Cell{wi().second}; }));
            Cell lo, hi;
            if ((1 << k) <= max_numeric_degree) {
                if (!es) err = es_error;
                else {
                    try {
                        WidomBracket b = widom_infty(*es, Const{1.0}, 1 << k, minimax_options());
                        lo = b.lo;
                        hi = b.hi;
                    } catch (const std::exception& e) {
                        err = e.what();
                    }
                }
            }
            // For k <= s the degree 2^k minimizer on E_s is F_k / lc(F_k), of norm 1 / lc(F_k).
            row.push_back(guard([&]() -> Cell {
                if (k > numeric_set) return Cell{};
                double lt = k == 0 ? std::log(0.5) : -iterate(g, k).log_leading;
                return std::exp(lt - std::ldexp(log_capacity_exact(g, numeric_set), k));
            }));
            row.push_back(lo);
            row.push_back(hi);
            row.push_back(guard([&] { return Cell{widom_2_exact_bracket(g, k).first}; }));
            row.push_back(guard([&] {
                double v = widom_2_exact_bracket(g, k).first;
                return Cell{v * v};
            }));
            row.push_back(err);
            r.error = err;
            r.rows.push_back(std::move(row));
            return r;
        });
        Table t = collect({"level", "cap_exact", "cap_numeric", "w_inf_exact", "w_inf_exact_upper", "w_inf_es_exact",
                           "w_inf_es_numeric_lower", "w_inf_es_numeric_upper", "w2_exact", "w2_squared_exact", "error"},
                          rs, [](std::size_t i) { return "level=" + std::to_string(i); });
        write_table("cantor.csv", t);
        auto column = [&](std::size_t c, const std::string& label, bool dashed = false) {
            Series s{label, {}, {}, dashed};
            for (const auto& r : t.rows)
                if (auto* v = std::get_if<double>(&r[c])) {
                    s.x.push_back(static_cast<double>(std::get<long long>(r[0])));
                    s.y.push_back(*v);
                }
            return s;
        };
        write_plot("cantor_capacity.svg", {cfg_.name + " capacity", "level s", "cap(E_s)",
                                           {column(1, "exact"), column(2, "numeric", true)}});
        write_plot("cantor_widom.svg", {cfg_.name + " Widom factors", "n (degree 2^n)", "value",
                                        {column(3, "W_inf exact"), column(5, "W_inf on E_s exact", true),
                                         column(9, "[W_2]^2 exact")}});
    }

    void conjecture_scan() {
        if (!cfg_.seed) detail::schema("conjecture-scan needs a seed");
        int count = cfg_.raw.value("instances", 20);
        int max_degree = cfg_.raw.value("max_degree", 32);
        std::vector<int> degrees = cfg_.degrees;
        if (degrees.empty())
            for (int n = 1; n <= max_degree; ++n) degrees.push_back(n);
        std::mt19937_64 rng(*cfg_.seed);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        struct Inst {
            RealCompactSet k = make_set({{-1.0, 1.0}});
            WeightExpr w;
            std::string family;
        };
        // Drawn sequentially so the instance list depends only on the seed.
        std::vector<Inst> inst;
        static const char* families[] = {"const", "jacobi", "abs-rational", "sqrt-rational", "strong-zero", "product"};
        for (int i = 0; i < count; ++i) {
            Inst in;
            int bands = 1 + static_cast<int>(u(rng) * 4);
            std::vector<double> cuts;
            for (int c = 0; c < 2 * bands; ++c) cuts.push_back(-2.0 + 4.0 * u(rng));
            std::sort(cuts.begin(), cuts.end());
            std::vector<Interval> iv;
            for (int b = 0; b < bands; ++b) {
                double lo = cuts[static_cast<std::size_t>(2 * b)], hi = cuts[static_cast<std::size_t>(2 * b + 1)];
                iv.push_back({lo, std::max(hi, lo + 0.05)});
            }
            in.k = normalize(iv);
            const Interval h = in.k.hull();
            auto inside = [&] {
                const Interval& b = in.k.band(static_cast<std::size_t>(u(rng) * in.k.size()) % in.k.size());
                return b.lo + (b.hi - b.lo) * u(rng);
            };
            auto off = [&] { return cplx(h.lo - 0.5 + (h.length() + 1.0) * u(rng), 0.1 + u(rng)); };
            int fam = i % 6;
            in.family = families[fam];
            switch (fam) {
                case 0: in.w = Const{0.5 + u(rng)}; break;
                case 1: in.w = Jacobi{2 * u(rng), 2 * u(rng), h}; break;
                case 2: {
                    cplx z = off(), p = off();
                    in.w = AbsRational{RationalFunction{1.0, {{inside(), 0}, z, std::conj(z)}, {p, std::conj(p)}}};
                    break;
                }
                case 3: {
                    cplx z = off(), x0{inside(), 0.0};
                    in.w = SqrtRational{RationalFunction{1.0, {z, std::conj(z), x0, x0}, {}}};
                    break;
                }
                case 4: in.w = StrongZero{inside(), 0.1 + 0.3 * u(rng)}; break;
                default: {
                    cplx p = off();
                    in.w = Product{{Jacobi{u(rng), u(rng), h}, AbsRational{RationalFunction{1.0, {{inside(), 0}}, {p, std::conj(p)}}}}};
                }
            }
            inst.push_back(std::move(in));
        }
        auto rs = parallel_rows<RowResult>(inst.size(), cfg_.threads, [&](std::size_t i) {
            RowResult r;
            const auto& in = inst[i];
            std::vector<Cell> row{static_cast<long long>(i), in.family, static_cast<long long>(in.k.size()),
                                  bands_label(in.k), weight_to_json(in.w).dump()};
            try {
                EquilibriumMeasure m(in.k);
                double s2 = 2 * szego_factor(m, in.w).value;
                double best = INFINITY;
                int arg = 0;
                std::string failed;
                for (int n : degrees) {
                    try {
                        WidomBracket b = widom_infty(m, in.w, n, minimax_options());
                        if (b.lo - s2 < best) {
                            best = b.lo - s2;
                            arg = n;
                        }
                    } catch (const std::exception& e) {
                        if (failed.empty()) failed = "n=" + std::to_string(n) + ": " + e.what();
                    }
                }
                row.insert(row.end(), {s2, opt(best, std::isfinite(best)), static_cast<long long>(arg), failed});
                r.error = failed;
            } catch (const std::exception& e) {
                r.error = e.what();
                row.insert(row.end(), {Cell{}, Cell{}, Cell{}, r.error});
            }
            r.rows.push_back(std::move(row));
            return r;
        });
        write_table("conjecture_scan.csv",
                    collect({"instance", "family", "bands", "intervals", "weight", "two_s", "min_margin", "argmin_n", "error"},
                            rs, [](std::size_t i) { return "instance=" + std::to_string(i); }));
    }
};

inline RunManifest run(const ExperimentConfig& cfg) { return Runner(cfg).run(); }

}  // namespace widomlab::harness
