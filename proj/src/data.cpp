#include "spherecc/data.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "spherecc/geometry.hpp"

namespace spherecc::data {
namespace {

std::vector<std::string_view> split_cells(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(',', start);
        auto cell = s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
        while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
        while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) cell.remove_suffix(1);
        out.push_back(cell);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

bool parse_double(std::string_view cell, double& v) {
    if (cell.empty()) return false;
    if (cell.front() == '+') cell.remove_prefix(1);
    auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    return ec == std::errc() && p == cell.data() + cell.size();
}

[[noreturn]] void parse_error(const std::filesystem::path& path, std::size_t line, const std::string& msg) {
    throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + msg);
}

constexpr char kMagic[8] = {'S', 'P', 'C', 'C', 'M', 'A', 'T', '1'};

}  // namespace

void Dataset::validate() const {
    if (labels && labels->size() != size()) throw std::invalid_argument("label count does not match rows");
    if (split) {
        std::vector<char> seen(size(), 0);
        for (const auto* part : {&split->train_idx, &split->test_idx})
            for (std::size_t i : *part) {
                if (i >= size()) throw std::invalid_argument("split index out of range");
                if (seen[i]++) throw std::invalid_argument("split parts overlap");
            }
        if (split->train_idx.size() + split->test_idx.size() != size())
            throw std::invalid_argument("split does not cover the dataset");
    }
}

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& idx) {
    Dataset out;
    out.name = ds.name;
    out.x.resize(static_cast<Eigen::Index>(idx.size()), ds.x.cols());
    if (ds.labels) out.labels.emplace();
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] >= ds.size()) throw std::out_of_range("subset index out of range");
        out.x.row(static_cast<Eigen::Index>(r)) = ds.x.row(static_cast<Eigen::Index>(idx[r]));
        if (ds.labels) out.labels->push_back((*ds.labels)[idx[r]]);
    }
    return out;
}

Dataset load_csv(const std::filesystem::path& path, bool has_labels) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<double> values;
    std::vector<int> labels;
    std::size_t cols = 0, rows = 0, lineno = 0;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_cells(line);
        if (first) {
            first = false;
            double tmp;
            if (std::none_of(cells.begin(), cells.end(), [&](std::string_view c) { return parse_double(c, tmp); }))
                continue;  // header
        }
        if (cols == 0) {
            cols = cells.size();
            if (has_labels && cols < 2) parse_error(path, lineno, "need at least one feature and a label column");
        } else if (cells.size() != cols) {
            parse_error(path, lineno, "ragged row: expected " + std::to_string(cols) + " cells, got " +
                                          std::to_string(cells.size()));
        }
        const std::size_t n_feat = has_labels ? cols - 1 : cols;
        for (std::size_t c = 0; c < n_feat; ++c) {
            double v;
            if (!parse_double(cells[c], v)) parse_error(path, lineno, "non-numeric cell '" + std::string(cells[c]) + "'");
            values.push_back(v);
        }
        if (has_labels) {
            int lab = 0;
            const auto cell = cells.back();
            auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), lab);
            if (ec != std::errc() || p != cell.data() + cell.size())
                parse_error(path, lineno, "label is not an integer: '" + std::string(cell) + "'");
            labels.push_back(lab);
        }
        ++rows;
    }
    if (rows == 0) throw std::runtime_error(path.string() + ": no data rows");
    Dataset ds;
    ds.name = path.stem().string();
    const std::size_t n_feat = has_labels ? cols - 1 : cols;
    ds.x = Eigen::Map<Matrix>(values.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n_feat));
    if (has_labels) ds.labels = std::move(labels);
    return ds;
}

void save_csv(const std::filesystem::path& path, const Dataset& ds, bool with_header) {
    std::FILE* f = std::fopen(path.string().c_str(), "w");
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    if (with_header) {
        for (Eigen::Index c = 0; c < ds.x.cols(); ++c) std::fprintf(f, c ? ",x%ld" : "x%ld", static_cast<long>(c));
        if (ds.labels) std::fprintf(f, ",label");
        std::fprintf(f, "\n");
    }
    for (Eigen::Index r = 0; r < ds.x.rows(); ++r) {
        for (Eigen::Index c = 0; c < ds.x.cols(); ++c) std::fprintf(f, c ? ",%.17g" : "%.17g", ds.x(r, c));
        if (ds.labels) std::fprintf(f, ",%d", (*ds.labels)[static_cast<std::size_t>(r)]);
        std::fprintf(f, "\n");
    }
    if (std::fclose(f) != 0) throw std::runtime_error("write failed: " + path.string());
}

void save_binary(const std::filesystem::path& path, const Matrix& m) {
    static_assert(std::endian::native == std::endian::little, "binary format assumes little-endian host");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    const std::uint64_t dims[2] = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
    out.write(kMagic, sizeof kMagic);
    out.write(reinterpret_cast<const char*>(dims), sizeof dims);
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

Matrix load_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    char magic[8];
    std::uint64_t dims[2];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw std::runtime_error(path.string() + ": bad magic");
    in.read(reinterpret_cast<char*>(dims), sizeof dims);
    if (!in) throw std::runtime_error(path.string() + ": truncated header");
    Matrix m(static_cast<Eigen::Index>(dims[0]), static_cast<Eigen::Index>(dims[1]));
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!in) throw std::runtime_error(path.string() + ": truncated payload");
    return m;
}

std::vector<std::size_t> allocate_counts(std::size_t n, const std::vector<double>& proportions) {
    if (proportions.empty()) throw std::invalid_argument("empty proportions");
    double sum = 0.0;
    for (double p : proportions) {
        if (!(p >= 0.0)) throw std::invalid_argument("proportions must be non-negative");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("proportions must sum to 1");
    std::vector<std::size_t> counts(proportions.size());
    std::vector<std::pair<double, std::size_t>> rem;
    std::size_t used = 0;
    for (std::size_t i = 0; i < proportions.size(); ++i) {
        const double exact = proportions[i] * static_cast<double>(n);
        counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        used += counts[i];
        rem.emplace_back(exact - static_cast<double>(counts[i]), i);
    }
    std::stable_sort(rem.begin(), rem.end(), [](auto& a, auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; used < n; ++i, ++used) ++counts[rem[i % rem.size()].second];
    return counts;
}

Dataset gen_gaussian_mixture(const MixtureSpec& spec) {
    if (spec.k < 2) throw std::invalid_argument("need k >= 2");
    if (spec.dim < 2) throw std::invalid_argument("need dim >= 2");
    if (spec.dim < spec.k - 1) throw std::invalid_argument("dim must be >= k - 1 to place simplex means");
    if (!(spec.separation > 0.0)) throw std::invalid_argument("separation must be > 0");
    if (!(spec.spread >= 0.0)) throw std::invalid_argument("spread must be >= 0");

    std::vector<std::size_t> counts;
    if (spec.proportions.empty()) {
        counts.assign(static_cast<std::size_t>(spec.k), spec.n_per_cluster);
    } else {
        if (static_cast<int>(spec.proportions.size()) != spec.k) throw std::invalid_argument("need one proportion per cluster");
        counts = allocate_counts(spec.n_total, spec.proportions);
    }
    const Matrix means = spec.separation * geometry::regular_simplex(spec.k, spec.dim);
    const std::size_t n = std::accumulate(counts.begin(), counts.end(), std::size_t{0});

    Dataset ds;
    ds.name = "gaussian_mixture";
    ds.x.resize(static_cast<Eigen::Index>(n), spec.dim);
    ds.labels.emplace();
    ds.labels->reserve(n);
    Rng rng = make_rng(spec.seed, "data.mixture");
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::Index r = 0;
    for (int c = 0; c < spec.k; ++c) {
        for (std::size_t i = 0; i < counts[static_cast<std::size_t>(c)]; ++i, ++r) {
            for (int j = 0; j < spec.dim; ++j) ds.x(r, j) = means(c, j) + spec.spread * normal(rng);
            ds.labels->push_back(c);
        }
    }
    return ds;
}

Dataset split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw std::invalid_argument("test_fraction must be in (0, 1)");
    Rng rng = make_rng(seed, "data.split");
    Split s;
    auto take = [&](std::vector<std::size_t> members) {
        std::shuffle(members.begin(), members.end(), rng);
        const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(members.size())));
        s.test_idx.insert(s.test_idx.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_test));
        s.train_idx.insert(s.train_idx.end(), members.begin() + static_cast<std::ptrdiff_t>(n_test), members.end());
    };
    if (ds.labels) {
        std::vector<int> classes(ds.labels->begin(), ds.labels->end());
        std::sort(classes.begin(), classes.end());
        classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
        for (int c : classes) {
            std::vector<std::size_t> members;
            for (std::size_t i = 0; i < ds.size(); ++i)
                if ((*ds.labels)[i] == c) members.push_back(i);
            take(std::move(members));
        }
    } else {
        std::vector<std::size_t> all(ds.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        take(std::move(all));
    }
    std::sort(s.train_idx.begin(), s.train_idx.end());
    std::sort(s.test_idx.begin(), s.test_idx.end());
    Dataset out = ds;
    out.split = std::move(s);
    return out;
}

void standardize(Dataset& ds) {
    for (Eigen::Index c = 0; c < ds.x.cols(); ++c) {
        auto col = ds.x.col(c);
        const double mean = col.mean();
        col.array() -= mean;
        const double sd = std::sqrt(col.squaredNorm() / static_cast<double>(std::max<Eigen::Index>(1, col.size())));
        if (sd > 0.0) col /= sd;
    }
}

}  // namespace spherecc::data
