#pragma once

#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "gloss/matrix.hpp"
#include "gloss/rng.hpp"

namespace gloss {

// =============================================================================
// Labeled feature datasets: loading, deterministic stratified splits, and
// minibatch iteration. Features are dense f64; labels are dense integers in
// [0, C). Read-only after load.
// =============================================================================

struct Dataset {
    Matrix features;             // n x d_in
    std::vector<int> labels;     // length n, values in [0, C)
    int num_classes = 0;
    std::vector<std::string> ids;  // optional, empty or length n

    int n() const { return features.rows(); }
    int dim() const { return features.cols(); }

    bool operator==(const Dataset& o) const {
        return features == o.features && labels == o.labels && num_classes == o.num_classes;
    }
};

struct Batch {
    std::vector<int> indices;  // distinct, valid into the source dataset
    Matrix x_raw;              // B x d_in
    std::vector<int> y;        // length B

    int size() const { return static_cast<int>(indices.size()); }
};

enum class DataFormat { csv, binary };

inline void validate_dataset(const Dataset& ds) {
    if (ds.n() < 1) throw ValidationError("dataset: need at least one row");
    if (ds.dim() < 1) throw ValidationError("dataset: need at least one feature column");
    if (ds.num_classes < 2) throw ValidationError("dataset: need at least two classes");
    if (static_cast<int>(ds.labels.size()) != ds.n())
        throw ValidationError("dataset: labels length does not match row count");
    if (!ds.ids.empty() && static_cast<int>(ds.ids.size()) != ds.n())
        throw ValidationError("dataset: ids length does not match row count");
    for (size_t i = 0; i < ds.labels.size(); ++i)
        if (ds.labels[i] < 0 || ds.labels[i] >= ds.num_classes)
            throw ValidationError("dataset: label " + std::to_string(ds.labels[i]) +
                                  " at row " + std::to_string(i) + " outside [0, " +
                                  std::to_string(ds.num_classes) + ")");
    if (!all_finite(ds.features))
        throw ValidationError("dataset: features contain NaN or Inf");
}

// ------------------------------------------------------------------ CSV

namespace detail {

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return out;
}

inline double parse_double(const std::string& s, long line) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ParseError("cannot parse '" + s + "' as a number", line);
    return v;
}

inline long parse_long(const std::string& s, long line) {
    long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ParseError("cannot parse '" + s + "' as an integer", line);
    return v;
}

// Header form: "# n=<int> d=<int> c=<int>"; every key optional.
struct CsvHeader {
    long n = -1, d = -1, c = -1;
};

inline CsvHeader parse_csv_header(const std::string& line) {
    CsvHeader h;
    size_t pos = 1;  // skip '#'
    while (pos < line.size()) {
        while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
        if (pos >= line.size()) break;
        size_t eq = line.find('=', pos);
        if (eq == std::string::npos) break;
        const std::string key = trim(line.substr(pos, eq - pos));
        size_t end = line.find(' ', eq + 1);
        if (end == std::string::npos) end = line.size();
        const std::string value = trim(line.substr(eq + 1, end - eq - 1));
        const long v = parse_long(value, 1);
        if (key == "n") h.n = v;
        else if (key == "d") h.d = v;
        else if (key == "c") h.c = v;
        else throw ParseError("unknown header key '" + key + "'", 1);
        pos = end;
    }
    return h;
}

} // namespace detail

inline Dataset load_dataset_csv(std::istream& in) {
    std::string line;
    long line_no = 0;
    detail::CsvHeader header;
    std::vector<double> values;
    std::vector<int> labels;
    std::vector<std::string> ids;
    bool any_ids = false;
    long d = -1;
    long rows = 0;

    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        if (t[0] == '#') {
            if (rows == 0) header = detail::parse_csv_header(t);
            continue;
        }
        auto fields = detail::split_csv_line(t);
        if (fields.size() < 2)
            throw ParseError("row needs at least one feature and a label", line_no);

        // Decide the feature width from the first data row: if the last field
        // parses as a number the row is features+label, otherwise it carries
        // a trailing id string.
        bool has_id;
        if (d < 0) {
            double probe;
            auto [p, ec] = std::from_chars(fields.back().data(),
                                           fields.back().data() + fields.back().size(), probe);
            has_id = (ec != std::errc() || p != fields.back().data() + fields.back().size());
            d = static_cast<long>(fields.size()) - (has_id ? 2 : 1);
            if (header.d >= 0 && header.d != d)
                throw ParseError("row width disagrees with header d=" + std::to_string(header.d),
                                 line_no);
            if (d < 1) throw ParseError("no feature columns", line_no);
        }
        if (static_cast<long>(fields.size()) == d + 1) {
            has_id = false;
        } else if (static_cast<long>(fields.size()) == d + 2) {
            has_id = true;
        } else {
            throw ParseError("expected " + std::to_string(d + 1) + " or " +
                             std::to_string(d + 2) + " fields, got " +
                             std::to_string(fields.size()), line_no);
        }

        for (long j = 0; j < d; ++j)
            values.push_back(detail::parse_double(fields[static_cast<size_t>(j)], line_no));
        const long label = detail::parse_long(fields[static_cast<size_t>(d)], line_no);
        if (label < 0) throw ValidationError("negative label at line " + std::to_string(line_no));
        labels.push_back(static_cast<int>(label));
        if (has_id) {
            ids.push_back(fields.back());
            any_ids = true;
        } else {
            ids.emplace_back();
        }
        ++rows;
    }

    if (rows == 0) throw ParseError("empty dataset file");
    if (header.n >= 0 && header.n != rows)
        throw ParseError("header n=" + std::to_string(header.n) + " but file has " +
                         std::to_string(rows) + " rows");

    Dataset ds;
    ds.features = Matrix(static_cast<int>(rows), static_cast<int>(d));
    ds.features.raw() = values;
    ds.labels = std::move(labels);
    int max_label = 0;
    for (int l : ds.labels) max_label = std::max(max_label, l);
    ds.num_classes = header.c >= 0 ? static_cast<int>(header.c) : max_label + 1;
    if (max_label >= ds.num_classes)
        throw ValidationError("label " + std::to_string(max_label) +
                              " >= declared class count " + std::to_string(ds.num_classes));
    if (any_ids) ds.ids = std::move(ids);
    validate_dataset(ds);
    return ds;
}

inline void save_dataset_csv(const Dataset& ds, std::ostream& out) {
    out << "# n=" << ds.n() << " d=" << ds.dim() << " c=" << ds.num_classes << "\n";
    char buf[40];
    for (int i = 0; i < ds.n(); ++i) {
        for (int j = 0; j < ds.dim(); ++j) {
            const int len = std::snprintf(buf, sizeof buf, "%.17g", ds.features(i, j));
            out.write(buf, len);
            out << ',';
        }
        out << ds.labels[static_cast<size_t>(i)];
        if (!ds.ids.empty()) out << ',' << ds.ids[static_cast<size_t>(i)];
        out << '\n';
    }
}

// ------------------------------------------------------------------ binary
//
// Layout (all little-endian):
//   magic "GLDS1", u64 n, u64 d, u64 C, n*d f64 features row-major, n u32 labels.

namespace detail {

template <typename T>
void write_pod(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw ParseError("unexpected end of binary dataset");
    return v;
}

} // namespace detail

inline constexpr char kDatasetMagic[5] = {'G', 'L', 'D', 'S', '1'};

inline void save_dataset_binary(const Dataset& ds, std::ostream& out) {
    out.write(kDatasetMagic, 5);
    detail::write_pod<uint64_t>(out, static_cast<uint64_t>(ds.n()));
    detail::write_pod<uint64_t>(out, static_cast<uint64_t>(ds.dim()));
    detail::write_pod<uint64_t>(out, static_cast<uint64_t>(ds.num_classes));
    out.write(reinterpret_cast<const char*>(ds.features.data()),
              static_cast<std::streamsize>(ds.features.size() * sizeof(double)));
    for (int l : ds.labels) detail::write_pod<uint32_t>(out, static_cast<uint32_t>(l));
}

inline Dataset load_dataset_binary(std::istream& in) {
    char magic[5];
    in.read(magic, 5);
    if (!in || std::memcmp(magic, kDatasetMagic, 5) != 0)
        throw ParseError("bad magic: not a GLDS1 dataset file");
    const auto n = detail::read_pod<uint64_t>(in);
    const auto d = detail::read_pod<uint64_t>(in);
    const auto c = detail::read_pod<uint64_t>(in);
    if (n == 0 || d == 0 || c < 2 || n > (1ULL << 40) || d > (1ULL << 30))
        throw ParseError("implausible dataset dimensions in header");
    Dataset ds;
    ds.features = Matrix(static_cast<int>(n), static_cast<int>(d));
    in.read(reinterpret_cast<char*>(ds.features.data()),
            static_cast<std::streamsize>(ds.features.size() * sizeof(double)));
    if (!in) throw ParseError("unexpected end of binary dataset (features)");
    ds.labels.resize(n);
    for (uint64_t i = 0; i < n; ++i)
        ds.labels[i] = static_cast<int>(detail::read_pod<uint32_t>(in));
    ds.num_classes = static_cast<int>(c);
    validate_dataset(ds);
    return ds;
}

inline Dataset load_dataset(const std::string& path, DataFormat format) {
    std::ifstream in(path, format == DataFormat::binary ? std::ios::binary : std::ios::in);
    if (!in) throw ParseError("cannot open '" + path + "'");
    return format == DataFormat::binary ? load_dataset_binary(in) : load_dataset_csv(in);
}

inline void save_dataset(const Dataset& ds, const std::string& path, DataFormat format) {
    std::ofstream out(path, format == DataFormat::binary ? std::ios::binary : std::ios::out);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    if (format == DataFormat::binary) save_dataset_binary(ds, out);
    else save_dataset_csv(ds, out);
}

// Picks the format from the file extension: .csv is text, anything else binary.
inline DataFormat format_from_path(const std::string& path) {
    const size_t dot = path.find_last_of('.');
    if (dot != std::string::npos && path.substr(dot) == ".csv") return DataFormat::csv;
    return DataFormat::binary;
}

// ------------------------------------------------------------------ splits

inline Dataset take_rows(const Dataset& ds, const std::vector<int>& rows) {
    Dataset out;
    out.features = Matrix(static_cast<int>(rows.size()), ds.dim());
    out.labels.resize(rows.size());
    out.num_classes = ds.num_classes;
    if (!ds.ids.empty()) out.ids.resize(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        for (int j = 0; j < ds.dim(); ++j)
            out.features(static_cast<int>(i), j) = ds.features(rows[i], j);
        out.labels[i] = ds.labels[static_cast<size_t>(rows[i])];
        if (!ds.ids.empty()) out.ids[i] = ds.ids[static_cast<size_t>(rows[i])];
    }
    return out;
}

struct SplitResult {
    Dataset train, val, test;
};

// Stratified three-way split. Per class, counts are rounded from the
// requested fractions and nudged so each split keeps at least one item when
// the class is large enough; a class with fewer rows than splits goes
// entirely to train (with a warning).
inline SplitResult split(const Dataset& ds, double train_frac, double val_frac,
                         uint64_t seed, std::vector<std::string>* warnings = nullptr) {
    if (!(train_frac > 0.0) || !(val_frac > 0.0) || !(train_frac + val_frac < 1.0))
        throw ValidationError("split: need train_frac > 0, val_frac > 0, sum < 1");

    std::vector<std::vector<int>> by_class(static_cast<size_t>(ds.num_classes));
    for (int i = 0; i < ds.n(); ++i)
        by_class[static_cast<size_t>(ds.labels[static_cast<size_t>(i)])].push_back(i);

    std::vector<int> train_idx, val_idx, test_idx;
    for (int c = 0; c < ds.num_classes; ++c) {
        auto& members = by_class[static_cast<size_t>(c)];
        if (members.empty()) continue;
        Rng rng(mix_seed(seed, 0x5f17, static_cast<uint64_t>(c)));
        rng.shuffle(members);
        const int nc = static_cast<int>(members.size());
        if (nc < 3) {
            if (warnings)
                warnings->push_back("class " + std::to_string(c) + " has only " +
                                    std::to_string(nc) + " rows; assigning all to train");
            train_idx.insert(train_idx.end(), members.begin(), members.end());
            continue;
        }
        int t = static_cast<int>(std::lround(train_frac * nc));
        int v = static_cast<int>(std::lround(val_frac * nc));
        t = std::clamp(t, 1, nc - 2);
        v = std::clamp(v, 1, nc - 1 - t);
        for (int i = 0; i < nc; ++i) {
            if (i < t) train_idx.push_back(members[static_cast<size_t>(i)]);
            else if (i < t + v) val_idx.push_back(members[static_cast<size_t>(i)]);
            else test_idx.push_back(members[static_cast<size_t>(i)]);
        }
    }
    return SplitResult{take_rows(ds, train_idx), take_rows(ds, val_idx), take_rows(ds, test_idx)};
}

// ------------------------------------------------------------------ batches

inline Batch make_batch(const Dataset& ds, const std::vector<int>& indices) {
    Batch b;
    b.indices = indices;
    b.x_raw = Matrix(static_cast<int>(indices.size()), ds.dim());
    b.y.resize(indices.size());
    for (size_t i = 0; i < indices.size(); ++i) {
        for (int j = 0; j < ds.dim(); ++j)
            b.x_raw(static_cast<int>(i), j) = ds.features(indices[i], j);
        b.y[i] = ds.labels[static_cast<size_t>(indices[i])];
    }
    return b;
}

// One epoch of minibatches. Every index appears exactly once; the final
// batch may be short. With shuffle off, batches follow row order.
inline std::vector<Batch> minibatches(const Dataset& ds, int batch_size, uint64_t seed,
                                      bool shuffle) {
    if (batch_size < 1 || batch_size > ds.n())
        throw ValidationError("minibatches: batch size " + std::to_string(batch_size) +
                              " outside [1, " + std::to_string(ds.n()) + "]");
    std::vector<int> order(static_cast<size_t>(ds.n()));
    for (int i = 0; i < ds.n(); ++i) order[static_cast<size_t>(i)] = i;
    if (shuffle) {
        Rng rng(mix_seed(seed, 0xba7c4));
        rng.shuffle(order);
    }
    std::vector<Batch> out;
    for (int start = 0; start < ds.n(); start += batch_size) {
        const int end = std::min(start + batch_size, ds.n());
        out.push_back(make_batch(ds, std::vector<int>(order.begin() + start, order.begin() + end)));
    }
    return out;
}

// ------------------------------------------------------------------ blobs

// Isotropic Gaussian clusters with class centers at exact pairwise distance
// `cluster_sep` (scaled orthogonal basis vectors; needs d >= C). Labels are
// assigned round-robin.
inline Dataset make_blobs(int n, int d, int num_classes, double cluster_sep, uint64_t seed) {
    if (num_classes < 2) throw ValidationError("make_blobs: need at least 2 classes");
    if (n < num_classes) throw ValidationError("make_blobs: need n >= number of classes");
    if (d < num_classes)
        throw ValidationError("make_blobs: need d >= number of classes for equidistant centers");
    if (cluster_sep < 0.0) throw ValidationError("make_blobs: separation must be >= 0");

    const double coord = cluster_sep / std::sqrt(2.0);
    Rng rng(mix_seed(seed, 0xb10b5));
    Dataset ds;
    ds.features = Matrix(n, d);
    ds.labels.resize(static_cast<size_t>(n));
    ds.num_classes = num_classes;
    for (int i = 0; i < n; ++i) {
        const int c = i % num_classes;
        ds.labels[static_cast<size_t>(i)] = c;
        for (int j = 0; j < d; ++j)
            ds.features(i, j) = (j == c ? coord : 0.0) + rng.normal();
    }
    return ds;
}

} // namespace gloss
