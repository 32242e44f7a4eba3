#include "spherecc/clustering.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <future>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>

#include <json.hpp>

namespace spherecc::clustering {
namespace {

struct LloydRun {
    Matrix centers;
    std::vector<int> assign;
    double inertia = std::numeric_limits<double>::infinity();
    std::vector<double> trace;
};

std::size_t count_distinct_rows(const Matrix& z, std::size_t limit) {
    std::vector<Eigen::Index> reps;
    for (Eigen::Index i = 0; i < z.rows() && reps.size() < limit; ++i) {
        bool seen = false;
        for (Eigen::Index r : reps)
            if (z.row(r) == z.row(i)) {
                seen = true;
                break;
            }
        if (!seen) reps.push_back(i);
    }
    return reps.size();
}

Matrix plus_plus_seeds(const Matrix& z, int k, Rng& rng) {
    const Eigen::Index n = z.rows();
    Matrix centers(k, z.cols());
    std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
    centers.row(0) = z.row(first(rng));
    std::vector<double> d2(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) d2[static_cast<std::size_t>(i)] = (z.row(i) - centers.row(0)).squaredNorm();
    for (int c = 1; c < k; ++c) {
        std::discrete_distribution<Eigen::Index> pick(d2.begin(), d2.end());
        centers.row(c) = z.row(pick(rng));
        for (Eigen::Index i = 0; i < n; ++i)
            d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], (z.row(i) - centers.row(c)).squaredNorm());
    }
    return centers;
}

// Assigns each row to its nearest center (ties: lowest index); returns inertia.
double assign_rows(const Matrix& z, const Matrix& centers, std::vector<int>& assign, std::vector<double>& dist) {
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (Eigen::Index c = 0; c < centers.rows(); ++c) {
            const double d = (z.row(i) - centers.row(c)).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(c);
            }
        }
        assign[static_cast<std::size_t>(i)] = best;
        dist[static_cast<std::size_t>(i)] = best_d;
        inertia += best_d;
    }
    return inertia;
}

LloydRun lloyd(const Matrix& z, int k, Rng& rng, int max_iter, double tol) {
    const auto n = static_cast<std::size_t>(z.rows());
    LloydRun run;
    run.centers = plus_plus_seeds(z, k, rng);
    run.assign.assign(n, 0);
    std::vector<double> dist(n);
    std::vector<int> prev;
    for (int it = 0; it < max_iter; ++it) {
        const double inertia = assign_rows(z, run.centers, run.assign, dist);
        run.trace.push_back(inertia);
        const bool stable = run.assign == prev;
        const bool flat = std::isfinite(run.inertia) && run.inertia - inertia <= tol * std::max(run.inertia, 1e-300);
        run.inertia = inertia;
        if (stable || flat) break;
        prev = run.assign;

        Matrix sums = Matrix::Zero(k, z.cols());
        std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
        for (std::size_t i = 0; i < n; ++i) {
            sums.row(run.assign[i]) += z.row(static_cast<Eigen::Index>(i));
            ++counts[static_cast<std::size_t>(run.assign[i])];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                run.centers.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
            } else {
                // empty cluster: reseed at the point farthest from its centroid
                const auto far = static_cast<std::size_t>(std::distance(dist.begin(), std::max_element(dist.begin(), dist.end())));
                run.centers.row(c) = z.row(static_cast<Eigen::Index>(far));
                dist[far] = 0.0;
            }
        }
    }
    return run;
}

void check_kmeans_input(const Matrix& z, int k) {
    if (k < 2) throw std::invalid_argument("k must be >= 2");
    if (z.rows() < k) throw std::invalid_argument("need at least k rows (N=" + std::to_string(z.rows()) + ", k=" + std::to_string(k) + ")");
    if (count_distinct_rows(z, static_cast<std::size_t>(k)) < static_cast<std::size_t>(k))
        throw DegenerateInputError("fewer distinct points than clusters");
}

// Union-find over point indices.
struct Dsu {
    std::vector<std::size_t> parent;
    explicit Dsu(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

}  // namespace

ClusterModel kmeans(const Matrix& z, int k, const KMeansOptions& opts) {
    check_kmeans_input(z, k);
    if (opts.restarts < 1) throw std::invalid_argument("restarts must be >= 1");
    const int restarts = opts.restarts;
    std::vector<LloydRun> runs(static_cast<std::size_t>(restarts));
    auto work = [&](int r) {
        Rng rng = make_rng(opts.seed, "kmeans.restart." + std::to_string(r));
        runs[static_cast<std::size_t>(r)] = lloyd(z, k, rng, opts.max_iter, opts.tol);
    };
    // Independent restarts; the winner depends only on per-restart seeds.
    const unsigned workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), static_cast<unsigned>(restarts)));
    if (workers == 1) {
        for (int r = 0; r < restarts; ++r) work(r);
    } else {
        std::vector<std::future<void>> jobs;
        for (unsigned w = 0; w < workers; ++w)
            jobs.push_back(std::async(std::launch::async, [&, w] {
                for (int r = static_cast<int>(w); r < restarts; r += static_cast<int>(workers)) work(r);
            }));
        for (auto& j : jobs) j.get();
    }
    std::size_t best = 0;
    for (std::size_t r = 1; r < runs.size(); ++r)
        if (runs[r].inertia < runs[best].inertia) best = r;

    ClusterModel m;
    m.k = k;
    m.assignments = std::move(runs[best].assign);
    m.inertia = runs[best].inertia;
    // reseeding can leave a cluster empty only if the loop hit max_iter right after a repair
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int a : m.assignments) ++counts[static_cast<std::size_t>(a)];
    if (std::find(counts.begin(), counts.end(), 0) != counts.end()) {
        std::vector<double> dist(m.assignments.size());
        m.inertia = assign_rows(z, runs[best].centers, m.assignments, dist);
    }
    m.centroids = sphere_centroids(z, m.assignments, k);
    return m;
}

std::vector<double> kmeans_inertia_trace(const Matrix& z, int k, std::uint64_t seed, int max_iter) {
    check_kmeans_input(z, k);
    Rng rng = make_rng(seed, "kmeans.restart.0");
    return lloyd(z, k, rng, max_iter, 0.0).trace;
}

double WardResult::linkage_distance(std::size_t k_prime) const {
    const std::size_t n = heights.size() + 1;
    if (k_prime < 2 || k_prime > n) throw std::out_of_range("linkage level out of range");
    return heights[n - k_prime];
}

WardResult agglomerative_ward(const Matrix& z, int k, std::size_t cap) {
    const auto n = static_cast<std::size_t>(z.rows());
    if (k < 2) throw std::invalid_argument("k must be >= 2");
    if (n < static_cast<std::size_t>(k)) throw std::invalid_argument("need at least k rows");
    if (n > cap)
        throw std::invalid_argument("Ward linkage needs O(N^2) memory: N=" + std::to_string(n) + " exceeds cap " +
                                    std::to_string(cap) + "; subsample the embedding first");

    // condensed upper-triangular matrix of Lance-Williams (squared) distances
    auto idx = [n](std::size_t i, std::size_t j) {
        if (i > j) std::swap(i, j);
        return i * n - i * (i + 1) / 2 + (j - i - 1);
    };
    std::vector<double> d(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            d[idx(i, j)] = (z.row(static_cast<Eigen::Index>(i)) - z.row(static_cast<Eigen::Index>(j))).squaredNorm();

    std::vector<std::size_t> size(n, 1);
    std::vector<char> active(n, 1);
    struct Merge {
        std::size_t a, b;
        double h;
    };
    std::vector<Merge> merges;
    merges.reserve(n - 1);
    std::vector<std::size_t> chain;
    std::size_t remaining = n;
    std::size_t next_start = 0;

    while (remaining > 1) {
        if (chain.empty()) {
            while (!active[next_start]) ++next_start;
            chain.push_back(next_start);
        }
        while (true) {
            const std::size_t a = chain.back();
            const std::size_t prev = chain.size() >= 2 ? chain[chain.size() - 2] : n;
            std::size_t best = n;
            double best_d = std::numeric_limits<double>::infinity();
            if (prev != n) {
                best = prev;
                best_d = d[idx(a, prev)];
            }
            for (std::size_t j = 0; j < n; ++j) {
                if (!active[j] || j == a) continue;
                const double dj = d[idx(a, j)];
                if (dj < best_d) {
                    best_d = dj;
                    best = j;
                }
            }
            if (best == prev) break;
            chain.push_back(best);
        }
        const std::size_t b = chain.back();
        chain.pop_back();
        const std::size_t a = chain.back();
        chain.pop_back();
        const double dab = d[idx(a, b)];
        merges.push_back({a, b, std::sqrt(std::max(dab, 0.0))});

        // merged cluster lives in slot b
        const double na = static_cast<double>(size[a]), nb = static_cast<double>(size[b]);
        for (std::size_t kk = 0; kk < n; ++kk) {
            if (!active[kk] || kk == a || kk == b) continue;
            const double nk = static_cast<double>(size[kk]);
            d[idx(kk, b)] = ((na + nk) * d[idx(kk, a)] + (nb + nk) * d[idx(kk, b)] - nk * dab) / (na + nb + nk);
        }
        active[a] = 0;
        size[b] += size[a];
        --remaining;
    }

    // Slots are reused, so replay merges in height order with slot -> point reps.
    // Each slot id refers to the cluster containing that original point, since
    // a merge of slots (a, b) leaves the union in slot b and b is a member of it.
    std::stable_sort(merges.begin(), merges.end(), [](const Merge& x, const Merge& y) { return x.h < y.h; });
    WardResult out;
    out.heights.reserve(merges.size());
    for (const auto& m : merges) out.heights.push_back(m.h);

    Dsu dsu(n);
    for (std::size_t s = 0; s + static_cast<std::size_t>(k) < n; ++s) dsu.unite(merges[s].a, merges[s].b);
    std::vector<long> label_of_root(n, -1);
    out.model.assignments.resize(n);
    int next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = dsu.find(i);
        if (label_of_root[r] < 0) label_of_root[r] = next++;
        out.model.assignments[i] = static_cast<int>(label_of_root[r]);
    }
    out.model.k = k;
    out.model.centroids = sphere_centroids(z, out.model.assignments, k);
    double inertia = 0.0;
    Matrix means = Matrix::Zero(k, z.cols());
    std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        means.row(out.model.assignments[i]) += z.row(static_cast<Eigen::Index>(i));
        counts[static_cast<std::size_t>(out.model.assignments[i])] += 1.0;
    }
    for (int c = 0; c < k; ++c) means.row(c) /= counts[static_cast<std::size_t>(c)];
    for (std::size_t i = 0; i < n; ++i)
        inertia += (z.row(static_cast<Eigen::Index>(i)) - means.row(out.model.assignments[i])).squaredNorm();
    out.model.inertia = inertia;
    return out;
}

Matrix sphere_centroids(const Matrix& z, const std::vector<int>& assignments, int k) {
    if (assignments.size() != static_cast<std::size_t>(z.rows())) throw std::invalid_argument("assignment count mismatch");
    Matrix c = Matrix::Zero(k, z.cols());
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        const int a = assignments[i];
        if (a < 0 || a >= k) throw std::out_of_range("assignment out of range");
        c.row(a) += z.row(static_cast<Eigen::Index>(i));
        ++counts[static_cast<std::size_t>(a)];
    }
    for (int r = 0; r < k; ++r) {
        if (counts[static_cast<std::size_t>(r)] == 0) throw std::invalid_argument("empty cluster " + std::to_string(r));
        const double nrm = c.row(r).norm();
        if (nrm == 0.0) throw std::invalid_argument("cluster " + std::to_string(r) + " has a zero mean direction");
        c.row(r) /= nrm;
    }
    return c;
}

std::vector<int> assign_nearest(const Matrix& centroids, const Matrix& z) {
    if (centroids.rows() == 0) throw std::invalid_argument("empty cluster model");
    if (centroids.cols() != z.cols()) throw std::invalid_argument("dimension mismatch between centroids and embedding");
    std::vector<int> out(static_cast<std::size_t>(z.rows()));
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const double nrm = z.row(i).norm();
        if (nrm == 0.0) throw std::invalid_argument("degenerate vector at row " + std::to_string(i));
        int best = 0;
        double best_cos = -std::numeric_limits<double>::infinity();
        for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
            const double cosv = z.row(i).dot(centroids.row(c)) / (nrm * centroids.row(c).norm());
            if (cosv > best_cos) {
                best_cos = cosv;
                best = static_cast<int>(c);
            }
        }
        out[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

std::vector<int> predict(const ClusterModel& model, const net::Autoencoder& encoder, const Matrix& x_new) {
    return assign_nearest(model.centroids, encoder.encode(x_new));
}

void save_cluster_model(const std::filesystem::path& path, const ClusterModel& model) {
    nlohmann::json j;
    j["k"] = model.k;
    j["dim"] = model.centroids.cols();
    j["inertia"] = model.inertia;
    auto& rows = j["centroids"] = nlohmann::json::array();
    for (Eigen::Index r = 0; r < model.centroids.rows(); ++r)
        rows.push_back(std::vector<double>(model.centroids.row(r).data(), model.centroids.row(r).data() + model.centroids.cols()));
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
}

ClusterModel load_cluster_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open cluster model " + path.string());
    const auto j = nlohmann::json::parse(in);
    ClusterModel m;
    m.k = j.at("k").get<int>();
    const auto rows = j.at("centroids").get<std::vector<std::vector<double>>>();
    if (static_cast<int>(rows.size()) != m.k) throw std::runtime_error("cluster model: k does not match centroid count");
    const std::size_t dim = rows.empty() ? 0 : rows.front().size();
    m.centroids.resize(m.k, static_cast<Eigen::Index>(dim));
    for (int r = 0; r < m.k; ++r) {
        if (rows[static_cast<std::size_t>(r)].size() != dim) throw std::runtime_error("cluster model: ragged centroids");
        for (std::size_t c = 0; c < dim; ++c) m.centroids(r, static_cast<Eigen::Index>(c)) = rows[static_cast<std::size_t>(r)][c];
    }
    m.inertia = j.value("inertia", 0.0);
    return m;
}

void write_assignments_csv(const std::filesystem::path& path, const std::vector<int>& assignments) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << "index,cluster\n";
    for (std::size_t i = 0; i < assignments.size(); ++i) out << i << ',' << assignments[i] << '\n';
}

std::vector<int> read_assignments_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::pair<std::size_t, int>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || (lineno == 1 && line.rfind("index", 0) == 0)) continue;
        const auto comma = line.find(',');
        std::size_t idx = 0;
        int cl = 0;
        const char* s = line.data();
        auto r1 = std::from_chars(s, s + (comma == std::string::npos ? line.size() : comma), idx);
        auto r2 = comma == std::string::npos ? std::from_chars_result{s, std::errc::invalid_argument}
                                             : std::from_chars(s + comma + 1, s + line.size(), cl);
        if (r1.ec != std::errc() || r2.ec != std::errc() || r2.ptr != s + line.size())
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected index,cluster");
        rows.emplace_back(idx, cl);
    }
    std::vector<int> out(rows.size(), -1);
    for (const auto& [i, c] : rows) {
        if (i >= out.size()) throw std::runtime_error(path.string() + ": index " + std::to_string(i) + " out of range");
        out[i] = c;
    }
    return out;
}

}  // namespace spherecc::clustering
