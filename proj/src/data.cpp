#include "rsfda/data.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>

#include "rsfda/errors.hpp"
#include "rsfda/rng.hpp"

namespace rsfda {

std::vector<std::size_t> DomainDataset::class_counts() const {
    std::vector<std::size_t> counts(static_cast<std::size_t>(std::max(class_count, 0)), 0);
    for (int v : y)
        if (v >= 0 && v < class_count) ++counts[v];
    return counts;
}

void DomainDataset::validate() const {
    if (class_count < 1) throw SchemaError("dataset '" + domain_tag + "' declares no classes");
    if (!(input_lo < input_hi)) throw SchemaError("dataset '" + domain_tag + "' has an empty input range");
    if (y.empty()) {
        if (!x.empty()) throw DimensionError("dataset has features but no labels");
        return;
    }
    require_matrix(x, 0, "dataset features");
    if (x.rows() != y.size()) throw DimensionError("dataset feature rows do not match labels");
    for (std::size_t i = 0; i < y.size(); ++i)
        if (y[i] < 0 || y[i] >= class_count)
            throw SchemaError("label " + std::to_string(y[i]) + " at sample " + std::to_string(i) +
                              " outside [0, " + std::to_string(class_count) + ")");
    for (double v : x.data())
        if (!(v >= input_lo && v <= input_hi))
            throw SchemaError("dataset '" + domain_tag + "' has a value outside its input range");
}

UnlabeledData UnlabeledData::from(const DomainDataset& d) {
    return UnlabeledData{d.x, d.input_lo, d.input_hi, d.class_count};
}

ShiftFamily family_from_string(const std::string& s) {
    if (s == "gaussian_blobs") return ShiftFamily::gaussian_blobs;
    if (s == "two_arcs") return ShiftFamily::two_arcs;
    throw ConfigError("unknown shift family '" + s + "'");
}

std::string to_string(ShiftFamily f) {
    return f == ShiftFamily::gaussian_blobs ? "gaussian_blobs" : "two_arcs";
}

void ShiftSpec::validate() const {
    if (classes < 1) throw ConfigError("shift spec: classes must be >= 1");
    if (samples_per_class < 1) throw ConfigError("shift spec: samples_per_class must be >= 1");
    if (input_dim < 2) throw ConfigError("shift spec: input_dim must be >= 2");
    if (family == ShiftFamily::two_arcs && classes != 2)
        throw ConfigError("shift spec: two_arcs generates exactly 2 classes");
    if (!(scale > 0.0) || !std::isfinite(scale)) throw ConfigError("shift spec: scale must be positive");
    if (!(noise_sigma > 0.0) || !std::isfinite(noise_sigma))
        throw ConfigError("shift spec: noise_sigma must be positive");
    if (!(weak_sigma > 0.0) || !std::isfinite(weak_sigma))
        throw ConfigError("shift spec: weak_sigma must be positive");
    if (!std::isfinite(rotation) || !std::isfinite(weak_shift))
        throw ConfigError("shift spec: parameters must be finite");
    if (translation.size() > static_cast<std::size_t>(input_dim))
        throw ConfigError("shift spec: translation longer than input_dim");
    for (double t : translation)
        if (!std::isfinite(t)) throw ConfigError("shift spec: translation must be finite");
}

double ShiftSpec::bound() const {
    double shift = 0.0;
    for (double t : translation) shift = std::max(shift, std::abs(t));
    // Arcs are centred so every point lies within 1.25 * scale of the origin.
    const double plane_extent = family == ShiftFamily::two_arcs ? 1.25 * scale : scale;
    const double plane = plane_extent + 4.0 * noise_sigma * scale + shift;
    const double weak = input_dim > 2 ? std::abs(weak_shift) + 4.0 * weak_sigma + shift : 0.0;
    return std::max(plane, weak);
}

namespace {

using CodeTable = std::vector<std::vector<double>>;

CodeTable make_codes(int classes, int weak_dims, Rng& rng) {
    CodeTable codes(classes, std::vector<double>(weak_dims));
    for (auto& row : codes)
        for (double& v : row) v = rng.uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0;
    return codes;
}

DomainDataset generate(const ShiftSpec& s, const CodeTable& codes, double bound, Rng& rng,
                       std::string tag) {
    const std::size_t D = s.input_dim;
    const std::size_t n = static_cast<std::size_t>(s.classes) * s.samples_per_class;
    DomainDataset d;
    d.x = Tensor({n, D});
    d.y.resize(n);
    d.domain_tag = std::move(tag);
    d.class_count = s.classes;
    d.input_lo = -bound;
    d.input_hi = bound;
    const double cr = std::cos(s.rotation), sr = std::sin(s.rotation);
    std::size_t i = 0;
    for (int c = 0; c < s.classes; ++c) {
        for (int k = 0; k < s.samples_per_class; ++k, ++i) {
            double px, py;
            if (s.family == ShiftFamily::gaussian_blobs) {
                const double a = 2.0 * std::numbers::pi * c / s.classes;
                px = std::cos(a) + rng.normal(0.0, s.noise_sigma);
                py = std::sin(a) + rng.normal(0.0, s.noise_sigma);
            } else {
                const double t = rng.uniform(0.0, std::numbers::pi);
                if (c == 0) {
                    px = std::cos(t) - 0.5;
                    py = std::sin(t) - 0.25;
                } else {
                    px = 0.5 - std::cos(t);
                    py = 0.25 - std::sin(t);
                }
                px += rng.normal(0.0, s.noise_sigma);
                py += rng.normal(0.0, s.noise_sigma);
            }
            double* row = &d.x(i, 0);
            row[0] = s.scale * (cr * px - sr * py);
            row[1] = s.scale * (sr * px + cr * py);
            for (std::size_t j = 2; j < D; ++j)
                row[j] = s.weak_shift * codes[c][j - 2] + rng.normal(0.0, s.weak_sigma);
            for (std::size_t j = 0; j < s.translation.size(); ++j) row[j] += s.translation[j];
            for (std::size_t j = 0; j < D; ++j) row[j] = std::clamp(row[j], -bound, bound);
            d.y[i] = c;
        }
    }
    return d;
}

}  // namespace

std::pair<DomainDataset, DomainDataset> make_domain_pair(const ShiftSpec& source,
                                                         const ShiftSpec& target,
                                                         std::uint64_t seed) {
    source.validate();
    target.validate();
    if (source.classes != target.classes)
        throw ConfigError("domain pair: source and target class counts differ");
    if (source.input_dim != target.input_dim)
        throw ConfigError("domain pair: source and target input dimensions differ");
    if (source.family != target.family)
        throw ConfigError("domain pair: source and target geometry families differ");
    Rng geometry(seed, streams::geometry);
    const CodeTable codes = make_codes(source.classes, source.input_dim - 2, geometry);
    const double bound = std::max(source.bound(), target.bound());
    Rng src_rng(seed, streams::data);
    Rng tgt_rng(seed, streams::data + 100);
    return {generate(source, codes, bound, src_rng, "source"),
            generate(target, codes, bound, tgt_rng, "target")};
}

DomainDataset subset(const DomainDataset& d, const std::vector<std::size_t>& idx) {
    DomainDataset out;
    out.domain_tag = d.domain_tag;
    out.input_lo = d.input_lo;
    out.input_hi = d.input_hi;
    out.class_count = d.class_count;
    if (!idx.empty()) out.x = d.x.gather_rows(idx);
    out.y.reserve(idx.size());
    for (auto i : idx) out.y.push_back(d.y.at(i));
    return out;
}

DatasetSplits split(const DomainDataset& d, SplitFractions f, std::uint64_t seed) {
    if (f.train < 0 || f.val < 0 || f.test < 0 || std::abs(f.train + f.val + f.test - 1.0) > 1e-9)
        throw ConfigError("split fractions must be nonnegative and sum to 1");
    Rng rng(seed, streams::split);
    std::vector<std::vector<std::size_t>> by_class(std::max(d.class_count, 1));
    for (std::size_t i = 0; i < d.y.size(); ++i) by_class.at(d.y[i]).push_back(i);
    for (auto& members : by_class) rng.shuffle(members);

    std::vector<std::size_t> order;
    order.reserve(d.size());
    for (std::size_t round = 0; order.size() < d.size(); ++round)
        for (auto& members : by_class)
            if (round < members.size()) order.push_back(members[round]);

    const std::size_t n = d.size();
    const auto n_train = static_cast<std::size_t>(std::llround(f.train * n));
    const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(f.val * n)));

    DatasetSplits s;
    s.train_idx.assign(order.begin(), order.begin() + n_train);
    s.val_idx.assign(order.begin() + n_train, order.begin() + n_train + n_val);
    s.test_idx.assign(order.begin() + n_train + n_val, order.end());
    rng.shuffle(s.train_idx);
    rng.shuffle(s.val_idx);
    rng.shuffle(s.test_idx);
    s.train = subset(d, s.train_idx);
    s.val = subset(d, s.val_idx);
    s.test = subset(d, s.test_idx);
    if (s.train.size() == 0) s.empty_splits.push_back("train");
    if (s.val.size() == 0) s.empty_splits.push_back("val");
    if (s.test.size() == 0) s.empty_splits.push_back("test");
    return s;
}

DomainDataset class_subset(const DomainDataset& d, int k) {
    if (k < 1 || k > d.class_count)
        throw ConfigError("class_subset: k = " + std::to_string(k) + " outside [1, " +
                          std::to_string(d.class_count) + "]");
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < d.y.size(); ++i)
        if (d.y[i] < k) keep.push_back(i);
    DomainDataset out = subset(d, keep);
    out.class_count = k;
    return out;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(std::string s) {
    const auto ws = " \t\r\n";
    s.erase(0, s.find_first_not_of(ws));
    const auto last = s.find_last_not_of(ws);
    s.erase(last == std::string::npos ? 0 : last + 1);
    return s;
}

}  // namespace

DomainDataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ":1: missing header row");
    auto header = split_line(line);
    for (auto& h : header) h = trim(h);
    if (header.size() < 2 || header.back() != "label")
        throw ParseError(path + ":1: header must be f0,...,f{D-1},label");
    const std::size_t D = header.size() - 1;
    for (std::size_t j = 0; j < D; ++j)
        if (header[j] != "f" + std::to_string(j))
            throw ParseError(path + ":1: column " + std::to_string(j + 1) + " should be named f" +
                             std::to_string(j) + ", got '" + header[j] + "'");

    std::vector<double> values;
    std::vector<int> labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != D + 1)
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(D + 1) + " cells, got " + std::to_string(cells.size()));
        for (std::size_t j = 0; j <= D; ++j) {
            const std::string cell = trim(cells[j]);
            char* end = nullptr;
            errno = 0;
            if (j < D) {
                const double v = std::strtod(cell.c_str(), &end);
                if (cell.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(v))
                    throw ParseError(path + ":" + std::to_string(line_no) + ": column '" + header[j] +
                                     "' is not a finite number: '" + cell + "'");
                values.push_back(v);
            } else {
                const long v = std::strtol(cell.c_str(), &end, 10);
                if (cell.empty() || *end != '\0' || errno == ERANGE)
                    throw ParseError(path + ":" + std::to_string(line_no) +
                                     ": column 'label' is not an integer: '" + cell + "'");
                if (v < 0 || (schema.class_count && v >= *schema.class_count))
                    throw SchemaError(path + ":" + std::to_string(line_no) + ": label " +
                                      std::to_string(v) + " outside the declared class range");
                labels.push_back(static_cast<int>(v));
            }
        }
    }
    DomainDataset d;
    d.domain_tag = schema.domain_tag;
    d.y = std::move(labels);
    if (!d.y.empty()) d.x = Tensor({d.y.size(), D}, std::move(values));
    d.class_count = schema.class_count ? *schema.class_count
                                       : (d.y.empty() ? 0 : *std::max_element(d.y.begin(), d.y.end()) + 1);
    if (schema.input_range) {
        d.input_lo = schema.input_range->first;
        d.input_hi = schema.input_range->second;
    } else if (!d.y.empty()) {
        const auto [lo, hi] = std::minmax_element(d.x.data().begin(), d.x.data().end());
        d.input_lo = *lo;
        d.input_hi = *hi > *lo ? *hi : *lo + 1.0;
    }
    d.validate();
    return d;
}

void export_csv(const DomainDataset& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    const std::size_t D = d.input_dim();
    for (std::size_t j = 0; j < D; ++j) out << 'f' << j << ',';
    out << "label\n";
    for (std::size_t i = 0; i < d.size(); ++i) {
        for (std::size_t j = 0; j < D; ++j) out << format_double(d.x(i, j)) << ',';
        out << d.y[i] << '\n';
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace rsfda
