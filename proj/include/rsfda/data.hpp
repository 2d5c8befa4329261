#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rsfda/tensor.hpp"

namespace rsfda {

struct DomainDataset {
    Tensor x;                 // [n x D]; empty when n == 0
    std::vector<int> y;
    std::string domain_tag;
    double input_lo = 0.0;
    double input_hi = 1.0;
    int class_count = 0;

    std::size_t size() const noexcept { return y.size(); }
    std::size_t input_dim() const noexcept { return x.empty() ? 0 : x.cols(); }
    std::vector<std::size_t> class_counts() const;

    // Checks label range, input range and x/y agreement.
    void validate() const;
};

// Target-phase view of a domain: features only. Adaptation code takes this
// type so it cannot see labels.
struct UnlabeledData {
    Tensor x;
    double input_lo = 0.0;
    double input_hi = 1.0;
    int class_count = 0;

    static UnlabeledData from(const DomainDataset& d);
};

enum class ShiftFamily { gaussian_blobs, two_arcs };

ShiftFamily family_from_string(const std::string& s);
std::string to_string(ShiftFamily f);

// Generator for one synthetic domain. The first two input coordinates carry
// the class geometry (blobs on a ring, or two interleaved arcs), transformed
// by rotation -> scale -> translation. Remaining coordinates are "weak"
// features: a per-class +/-1 code times weak_shift plus N(0, weak_sigma^2)
// noise. The code table is shared by both domains of a pair.
struct ShiftSpec {
    ShiftFamily family = ShiftFamily::gaussian_blobs;
    double rotation = 0.0;               // radians
    std::vector<double> translation;     // up to input_dim entries
    double scale = 1.0;
    double noise_sigma = 0.1;
    int classes = 2;
    int samples_per_class = 100;
    int input_dim = 2;
    double weak_shift = 0.0;
    double weak_sigma = 1.0;

    void validate() const;
    double bound() const;  // analytic |x| bound padded by 4 sigma
};

std::pair<DomainDataset, DomainDataset> make_domain_pair(const ShiftSpec& source,
                                                         const ShiftSpec& target,
                                                         std::uint64_t seed);

struct SplitFractions {
    double train = 0.7;
    double val = 0.1;
    double test = 0.2;
};

struct DatasetSplits {
    DomainDataset train, val, test;
    std::vector<std::size_t> train_idx, val_idx, test_idx;  // into the parent dataset
    std::vector<std::string> empty_splits;
};

// Stratified seeded split. Classes are shuffled independently and then
// interleaved round-robin, so every prefix cut keeps class proportions.
DatasetSplits split(const DomainDataset& d, SplitFractions f, std::uint64_t seed);

DomainDataset subset(const DomainDataset& d, const std::vector<std::size_t>& idx);

// Samples of classes [0, k), labels unchanged, class_count = k.
DomainDataset class_subset(const DomainDataset& d, int k);

struct CsvSchema {
    std::string domain_tag = "csv";
    std::optional<std::pair<double, double>> input_range;
    std::optional<int> class_count;
};

DomainDataset load_csv(const std::string& path, const CsvSchema& schema = {});
void export_csv(const DomainDataset& d, const std::string& path);

// Shortest-round-trip-safe text for a double (17 significant digits).
std::string format_double(double v);

}  // namespace rsfda
