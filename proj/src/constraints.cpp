#include "spherecc/constraints.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace spherecc {
namespace {

// Pair spaces up to this size are materialized and shuffled; larger ones are
// sampled by rejection against a dedup set.
constexpr std::uint64_t kShuffleLimit = 1ULL << 22;

std::size_t parse_index(std::string_view cell, std::size_t line) {
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || p != cell.data() + cell.size())
        throw std::runtime_error("constraint file line " + std::to_string(line) + ": bad integer '" +
                                 std::string(cell) + "'");
    return v;
}

std::vector<std::string_view> split_commas(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(',', start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    for (auto& c : out) {
        while (!c.empty() && (c.front() == ' ' || c.front() == '\t')) c.remove_prefix(1);
        while (!c.empty() && (c.back() == ' ' || c.back() == '\t' || c.back() == '\r')) c.remove_suffix(1);
    }
    return out;
}

// Decodes pair id t in [0, n(n-1)/2) to (a, b) with a < b, row-major.
std::pair<std::size_t, std::size_t> decode_pair(std::uint64_t t, const std::vector<std::uint64_t>& row_start) {
    auto it = std::upper_bound(row_start.begin(), row_start.end(), t);
    const std::size_t a = static_cast<std::size_t>(std::distance(row_start.begin(), it)) - 1;
    const std::size_t b = a + 1 + static_cast<std::size_t>(t - row_start[a]);
    return {a, b};
}

Link link_for(std::span<const int> labels, std::size_t a, std::size_t b) {
    return labels[a] == labels[b] ? Link::MustLink : Link::CannotLink;
}

}  // namespace

Constraint make_constraint(std::size_t a, std::size_t b, Link y) {
    if (a == b) throw std::invalid_argument("constraint endpoints must differ");
    if (a > b) std::swap(a, b);
    return Constraint{a, b, y};
}

void ConstraintSet::add(std::size_t a, std::size_t b, Link y) {
    const Constraint c = make_constraint(a, b, y);
    if (c.b >= n_) throw std::out_of_range("constraint index " + std::to_string(c.b) + " out of range");
    if (!keys_.insert(key(c.a, c.b)).second)
        throw std::invalid_argument("duplicate constraint pair (" + std::to_string(c.a) + "," + std::to_string(c.b) + ")");
    items_.push_back(c);
}

bool ConstraintSet::contains_pair(std::size_t a, std::size_t b) const {
    if (a > b) std::swap(a, b);
    return keys_.contains(key(a, b));
}

std::size_t ConstraintSet::count_must_link() const {
    return static_cast<std::size_t>(std::count_if(items_.begin(), items_.end(), [](const Constraint& c) { return c.must_link(); }));
}

ConstraintSet ConstraintSet::negatives() const {
    ConstraintSet out(n_);
    for (const auto& c : items_)
        if (!c.must_link()) out.add(c);
    return out;
}

bool ConstraintSet::is_subset_of(const ConstraintSet& other) const {
    std::unordered_set<std::uint64_t> neg_other;
    for (const auto& c : other.items_)
        if (!c.must_link()) neg_other.insert(key(c.a, c.b));
    for (const auto& c : items_) {
        if (!other.contains_pair(c.a, c.b)) return false;
        if (neg_other.contains(key(c.a, c.b)) == c.must_link()) return false;
    }
    return true;
}

ConstraintSet sample_balanced(std::span<const int> labels, std::size_t m, std::uint64_t seed) {
    const std::size_t n = labels.size();
    if (n < 2) throw std::invalid_argument("need at least two instances");
    if (m < 1) throw std::invalid_argument("need at least one constraint");
    const std::uint64_t total = static_cast<std::uint64_t>(n) * (n - 1) / 2;
    if (m > total)
        throw std::invalid_argument("requested " + std::to_string(m) + " constraints but only " +
                                    std::to_string(total) + " distinct pairs exist");

    Rng rng = make_rng(seed, "constraints.balanced");
    ConstraintSet out(n);
    if (total <= kShuffleLimit) {
        std::vector<std::uint64_t> row_start(n);
        std::uint64_t acc = 0;
        for (std::size_t a = 0; a < n; ++a) {
            row_start[a] = acc;
            acc += n - 1 - a;
        }
        std::vector<std::uint64_t> ids(total);
        std::iota(ids.begin(), ids.end(), std::uint64_t{0});
        // partial Fisher-Yates: the first m slots become a uniform m-subset
        for (std::size_t i = 0; i < m; ++i) {
            std::uniform_int_distribution<std::uint64_t> pick(i, total - 1);
            std::swap(ids[i], ids[pick(rng)]);
            auto [a, b] = decode_pair(ids[i], row_start);
            out.add(a, b, link_for(labels, a, b));
        }
    } else {
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        while (out.size() < m) {
            std::size_t a = pick(rng), b = pick(rng);
            if (a == b || out.contains_pair(a, b)) continue;
            out.add(a, b, link_for(labels, a, b));
        }
    }
    return out;
}

ImbGroup sample_imbalanced(std::span<const int> labels, ImbSizes sizes, int imb_cluster, std::uint64_t seed) {
    if (!(sizes.m0 < sizes.m1 && sizes.m1 < sizes.m2))
        throw std::invalid_argument("IMB sizes must satisfy m0 < m1 < m2");
    std::vector<std::size_t> inside, outside;
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == imb_cluster ? inside : outside).push_back(i);
    if (inside.empty()) throw std::invalid_argument("imb_cluster not present in labels");

    ImbGroup g;
    g.imb_cluster = imb_cluster;
    g.seed = seed;
    g.imb0 = sample_balanced(labels, sizes.m0, seed);

    const std::uint64_t cross = static_cast<std::uint64_t>(inside.size()) * outside.size();
    std::uint64_t already = 0;
    for (const auto& c : g.imb0.items())
        if ((labels[c.a] == imb_cluster) != (labels[c.b] == imb_cluster)) ++already;
    const std::size_t needed = sizes.m2 - sizes.m0;
    if (cross - already < needed)
        throw std::invalid_argument("insufficient cross pairs involving the IMB cluster: need " +
                                    std::to_string(needed) + ", have " + std::to_string(cross - already));

    Rng rng = make_rng(seed, "constraints.imbalanced");
    std::vector<std::pair<std::size_t, std::size_t>> extra;
    extra.reserve(needed);
    if (cross <= kShuffleLimit) {
        std::vector<std::uint64_t> ids(cross);
        std::iota(ids.begin(), ids.end(), std::uint64_t{0});
        for (std::size_t i = 0; i < ids.size() && extra.size() < needed; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, ids.size() - 1);
            std::swap(ids[i], ids[pick(rng)]);
            const std::size_t a = inside[ids[i] / outside.size()];
            const std::size_t b = outside[ids[i] % outside.size()];
            if (!g.imb0.contains_pair(a, b)) extra.emplace_back(a, b);
        }
    } else {
        std::unordered_set<std::uint64_t> seen;
        std::uniform_int_distribution<std::size_t> pi(0, inside.size() - 1), po(0, outside.size() - 1);
        while (extra.size() < needed) {
            const std::size_t a = inside[pi(rng)], b = outside[po(rng)];
            const std::uint64_t k = (static_cast<std::uint64_t>(std::min(a, b)) << 32) | std::max(a, b);
            if (g.imb0.contains_pair(a, b) || !seen.insert(k).second) continue;
            extra.emplace_back(a, b);
        }
    }

    g.imb1 = g.imb0;
    std::size_t i = 0;
    for (; i < sizes.m1 - sizes.m0; ++i) g.imb1.add(extra[i].first, extra[i].second, Link::CannotLink);
    g.imb2 = g.imb1;
    for (; i < needed; ++i) g.imb2.add(extra[i].first, extra[i].second, Link::CannotLink);
    return g;
}

Matrix constraint_heatmap(const ConstraintSet& cs, std::span<const int> labels) {
    if (cs.empty()) throw std::invalid_argument("empty constraint set");
    int k = 0;
    for (const auto& c : cs.items()) {
        if (c.b >= labels.size()) throw std::out_of_range("labels do not cover constrained index");
        k = std::max({k, labels[c.a] + 1, labels[c.b] + 1});
    }
    Matrix h = Matrix::Zero(k, k);
    const double w = 1.0 / static_cast<double>(cs.size());
    for (const auto& c : cs.items()) {
        const int la = labels[c.a], lb = labels[c.b];
        if (la < 0 || lb < 0) throw std::invalid_argument("negative label");
        if (la == lb) {
            h(la, la) += w;
        } else {
            h(la, lb) += 0.5 * w;
            h(lb, la) += 0.5 * w;
        }
    }
    return h;
}

void write_constraints_csv(const std::filesystem::path& path, const ConstraintSet& cs) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << "a,b,y\n";
    for (const auto& c : cs.items()) out << c.a << ',' << c.b << ',' << (c.must_link() ? 1 : 0) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

ConstraintSet read_constraints_csv(const std::filesystem::path& path, std::size_t n_instances) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<Constraint> rows;
    std::string line;
    std::size_t lineno = 0;
    std::size_t max_index = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto cells = split_commas(line);
        if (lineno == 1 && !cells.empty() && cells[0] == "a") continue;
        if (cells.size() != 3)
            throw std::runtime_error("constraint file line " + std::to_string(lineno) + ": expected 3 columns");
        const std::size_t a = parse_index(cells[0], lineno);
        const std::size_t b = parse_index(cells[1], lineno);
        const std::size_t y = parse_index(cells[2], lineno);
        if (y > 1) throw std::runtime_error("constraint file line " + std::to_string(lineno) + ": y must be 0 or 1");
        rows.push_back(make_constraint(a, b, y == 1 ? Link::MustLink : Link::CannotLink));
        max_index = std::max(max_index, rows.back().b);
    }
    ConstraintSet cs(n_instances == 0 ? max_index + 1 : n_instances);
    for (const auto& c : rows) cs.add(c);
    return cs;
}

void write_imb_group(const std::filesystem::path& dir, const ImbGroup& group) {
    std::filesystem::create_directories(dir);
    write_constraints_csv(dir / "imb0.csv", group.imb0);
    write_constraints_csv(dir / "imb1.csv", group.imb1);
    write_constraints_csv(dir / "imb2.csv", group.imb2);
    nlohmann::json j;
    j["imb_cluster"] = group.imb_cluster;
    j["seed"] = group.seed;
    j["sizes"] = {group.imb0.size(), group.imb1.size(), group.imb2.size()};
    j["files"] = {"imb0.csv", "imb1.csv", "imb2.csv"};
    std::ofstream out(dir / "imb_manifest.json");
    out << j.dump(2) << '\n';
}

ImbGroup read_imb_group(const std::filesystem::path& dir, std::size_t n_instances) {
    std::ifstream in(dir / "imb_manifest.json");
    if (!in) throw std::runtime_error("missing imb_manifest.json in " + dir.string());
    const auto j = nlohmann::json::parse(in);
    ImbGroup g;
    g.imb_cluster = j.at("imb_cluster").get<int>();
    g.seed = j.at("seed").get<std::uint64_t>();
    const auto files = j.at("files");
    g.imb0 = read_constraints_csv(dir / files.at(0).get<std::string>(), n_instances);
    g.imb1 = read_constraints_csv(dir / files.at(1).get<std::string>(), n_instances);
    g.imb2 = read_constraints_csv(dir / files.at(2).get<std::string>(), n_instances);
    return g;
}

}  // namespace spherecc
