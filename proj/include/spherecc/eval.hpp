#pragma once

// External clustering metrics: ACC (optimal one-to-one label matching),
// NMI (geometric-mean normalization, natural log) and ARI.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "spherecc/common.hpp"

namespace spherecc::eval {

/// Counts n[i][j] of points with predicted label i and true label j, over
/// labels remapped to 0..K-1 in order of first appearance.
struct Contingency {
    std::vector<std::vector<long long>> counts;
    std::size_t n = 0;

    std::vector<long long> row_sums() const;
    std::vector<long long> col_sums() const;
};

Contingency contingency(std::span<const int> pred, std::span<const int> truth);

double accuracy(std::span<const int> pred, std::span<const int> truth);
double nmi(std::span<const int> pred, std::span<const int> truth);
double ari(std::span<const int> pred, std::span<const int> truth);

/// Minimum-cost assignment for a rectangular cost matrix (rows <= or > cols
/// both fine). Returns, per row, the assigned column or -1.
std::vector<int> hungarian(const std::vector<std::vector<double>>& cost);

struct MetricReport {
    double acc = 0.0;
    double nmi = 0.0;
    double ari = 0.0;
    std::size_t n = 0;
    Contingency table;
    std::string nmi_normalization = "geometric";
};

MetricReport evaluate(std::span<const int> pred, std::span<const int> truth);

void write_metrics_json(const std::filesystem::path& path, const MetricReport& report);
/// One header line and one row; appends the row if the file already exists.
void append_metrics_csv(const std::filesystem::path& path, const std::string& tag, const MetricReport& report);

}  // namespace spherecc::eval
