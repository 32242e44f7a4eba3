#include "spherecc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

namespace spherecc::eval {
namespace {

void check_lengths(std::span<const int> pred, std::span<const int> truth) {
    if (pred.size() != truth.size())
        throw std::invalid_argument("length mismatch: " + std::to_string(pred.size()) + " predictions vs " +
                                    std::to_string(truth.size()) + " labels");
    if (pred.empty()) throw std::invalid_argument("empty label vectors");
}

std::vector<int> remap(std::span<const int> labels, std::size_t& k) {
    std::unordered_map<int, int> ids;
    std::vector<int> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto [it, fresh] = ids.try_emplace(labels[i], static_cast<int>(ids.size()));
        out[i] = it->second;
    }
    k = ids.size();
    return out;
}

double comb2(double x) { return x * (x - 1.0) / 2.0; }

double entropy(const std::vector<long long>& sums, double n) {
    double h = 0.0;
    for (long long s : sums)
        if (s > 0) {
            const double p = static_cast<double>(s) / n;
            h -= p * std::log(p);
        }
    return h;
}

}  // namespace

std::vector<long long> Contingency::row_sums() const {
    std::vector<long long> out(counts.size(), 0);
    for (std::size_t i = 0; i < counts.size(); ++i)
        for (long long c : counts[i]) out[i] += c;
    return out;
}

std::vector<long long> Contingency::col_sums() const {
    std::vector<long long> out(counts.empty() ? 0 : counts.front().size(), 0);
    for (const auto& row : counts)
        for (std::size_t j = 0; j < row.size(); ++j) out[j] += row[j];
    return out;
}

Contingency contingency(std::span<const int> pred, std::span<const int> truth) {
    check_lengths(pred, truth);
    std::size_t kp = 0, kt = 0;
    const auto p = remap(pred, kp);
    const auto t = remap(truth, kt);
    Contingency c;
    c.n = pred.size();
    c.counts.assign(kp, std::vector<long long>(kt, 0));
    for (std::size_t i = 0; i < p.size(); ++i) ++c.counts[static_cast<std::size_t>(p[i])][static_cast<std::size_t>(t[i])];
    return c;
}

std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
    const std::size_t rows = cost.size();
    if (rows == 0) return {};
    const std::size_t cols = cost.front().size();
    for (const auto& r : cost)
        if (r.size() != cols) throw std::invalid_argument("hungarian: ragged cost matrix");
    if (rows > cols) {
        std::vector<std::vector<double>> tr(cols, std::vector<double>(rows));
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) tr[j][i] = cost[i][j];
        const auto col_to_row = hungarian(tr);
        std::vector<int> out(rows, -1);
        for (std::size_t j = 0; j < cols; ++j)
            if (col_to_row[j] >= 0) out[static_cast<std::size_t>(col_to_row[j])] = static_cast<int>(j);
        return out;
    }
    // potentials method, 1-based with a virtual column 0
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
    std::vector<std::size_t> match(cols + 1, 0), way(cols + 1, 0);
    for (std::size_t i = 1; i <= rows; ++i) {
        match[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(cols + 1, inf);
        std::vector<char> used(cols + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = match[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= cols; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= cols; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> out(rows, -1);
    for (std::size_t j = 1; j <= cols; ++j)
        if (match[j] != 0) out[match[j] - 1] = static_cast<int>(j - 1);
    return out;
}

double accuracy(std::span<const int> pred, std::span<const int> truth) {
    const Contingency c = contingency(pred, truth);
    std::vector<std::vector<double>> cost(c.counts.size());
    for (std::size_t i = 0; i < c.counts.size(); ++i)
        for (long long x : c.counts[i]) cost[i].push_back(-static_cast<double>(x));
    const auto assign = hungarian(cost);
    long long matched = 0;
    for (std::size_t i = 0; i < assign.size(); ++i)
        if (assign[i] >= 0) matched += c.counts[i][static_cast<std::size_t>(assign[i])];
    return static_cast<double>(matched) / static_cast<double>(c.n);
}

double nmi(std::span<const int> pred, std::span<const int> truth) {
    const Contingency c = contingency(pred, truth);
    const double n = static_cast<double>(c.n);
    const auto a = c.row_sums();
    const auto b = c.col_sums();
    const double hp = entropy(a, n), ht = entropy(b, n);
    if (a.size() == 1 && b.size() == 1) return 1.0;
    if (hp == 0.0 || ht == 0.0) return 0.0;
    double mi = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) {
            const double nij = static_cast<double>(c.counts[i][j]);
            if (nij > 0.0) mi += nij / n * std::log(n * nij / (static_cast<double>(a[i]) * static_cast<double>(b[j])));
        }
    return std::clamp(mi / std::sqrt(hp * ht), 0.0, 1.0);
}

double ari(std::span<const int> pred, std::span<const int> truth) {
    const Contingency c = contingency(pred, truth);
    double index = 0.0, sa = 0.0, sb = 0.0;
    for (const auto& row : c.counts)
        for (long long x : row) index += comb2(static_cast<double>(x));
    for (long long x : c.row_sums()) sa += comb2(static_cast<double>(x));
    for (long long x : c.col_sums()) sb += comb2(static_cast<double>(x));
    const double total = comb2(static_cast<double>(c.n));
    const double expected = total > 0.0 ? sa * sb / total : 0.0;
    const double denom = 0.5 * (sa + sb) - expected;
    if (denom == 0.0) return (index == sa && index == sb) ? 1.0 : 0.0;
    return (index - expected) / denom;
}

MetricReport evaluate(std::span<const int> pred, std::span<const int> truth) {
    MetricReport r;
    r.acc = accuracy(pred, truth);
    r.nmi = nmi(pred, truth);
    r.ari = ari(pred, truth);
    r.n = pred.size();
    r.table = contingency(pred, truth);
    return r;
}

void write_metrics_json(const std::filesystem::path& path, const MetricReport& report) {
    nlohmann::json j;
    j["acc"] = report.acc;
    j["nmi"] = report.nmi;
    j["ari"] = report.ari;
    j["n"] = report.n;
    j["nmi_normalization"] = report.nmi_normalization;
    j["contingency"] = report.table.counts;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
}

void append_metrics_csv(const std::filesystem::path& path, const std::string& tag, const MetricReport& report) {
    const bool fresh = !std::filesystem::exists(path);
    std::ofstream out(path, std::ios::app);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.precision(17);
    if (fresh) out << "tag,n,acc,nmi,ari\n";
    out << tag << ',' << report.n << ',' << report.acc << ',' << report.nmi << ',' << report.ari << '\n';
}

}  // namespace spherecc::eval
