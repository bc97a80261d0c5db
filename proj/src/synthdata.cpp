#include "cobias/synthdata.hpp"

#include <fstream>
#include <stdexcept>

#include "cobias/textio.hpp"

namespace cobias {

void SpuriousSpec::validate() const {
    if (A < 1 || B < 1) throw std::invalid_argument("SpuriousSpec: A and B must be positive");
    double lo = 1.0 / static_cast<double>(B);
    if (corr < lo - 1e-12 || corr > 1.0 + 1e-12)
        throw std::invalid_argument("SpuriousSpec: corr " + fmt_g17(corr) + " outside [1/B, 1] = [" +
                                    fmt_g17(lo) + ", 1]");
    if (n < A * B)
        throw std::invalid_argument("SpuriousSpec: n = " + std::to_string(n) +
                                    " smaller than the number of groups " + std::to_string(A * B));
    if (d_core < 1 || d_bias < 1)
        throw std::invalid_argument("SpuriousSpec: d_core and d_bias must be >= 1");
    if (noise_sigma < 0.0) throw std::invalid_argument("SpuriousSpec: negative noise_sigma");
    if (shift) {
        if (shift->corr < lo - 1e-12 || shift->corr > 1.0 + 1e-12)
            throw std::invalid_argument("SpuriousSpec: shift corr outside [1/B, 1]");
    }
}

namespace {

LabeledDataset draw_split(const SpuriousSpec& spec, double corr, double sep, RngState rng) {
    const std::size_t d = spec.input_dim();
    LabeledDataset ds;
    ds.A = spec.A;
    ds.B = spec.B;
    ds.X = Matrix(spec.n, d);
    ds.Y.resize(spec.n);
    ds.Z.resize(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        std::size_t y = rng.next_below(spec.A);
        std::size_t matched = y % spec.B;
        std::size_t z;
        if (spec.B == 1) {
            z = 0;
        } else if (rng.next_unit() < corr) {
            z = matched;
        } else {
            std::size_t k = rng.next_below(spec.B - 1);
            z = k >= matched ? k + 1 : k;
        }
        ds.Y[i] = static_cast<int>(y);
        ds.Z[i] = static_cast<int>(z);
        for (std::size_t j = 0; j < d; ++j) ds.X(i, j) = spec.noise_sigma * rng.next_normal();
        ds.X(i, y % spec.d_core) += sep;
        ds.X(i, spec.d_core + z % spec.d_bias) += sep;
    }
    // every group must be populated
    std::vector<std::size_t> count(spec.A * spec.B, 0);
    for (std::size_t i = 0; i < spec.n; ++i) count[ds.group(i)]++;
    for (std::size_t g = 0; g < count.size(); ++g)
        if (count[g] == 0)
            throw std::runtime_error("generate: group (y=" + std::to_string(g / spec.B) +
                                     ", z=" + std::to_string(g % spec.B) +
                                     ") received no samples; increase n");
    return ds;
}

}  // namespace

DatasetPair generate(const SpuriousSpec& spec) {
    spec.validate();
    RngState root(spec.seed);
    double test_corr = spec.shift ? spec.shift->corr : 1.0 / static_cast<double>(spec.B);
    double test_sep = spec.shift ? spec.shift->signal_sep : spec.signal_sep;
    DatasetPair out;
    out.train = draw_split(spec, spec.corr, spec.signal_sep, root.derive("train"));
    out.test = draw_split(spec, test_corr, test_sep, root.derive("test"));
    return out;
}

std::vector<int> apply_label_noise(const std::vector<int>& y, double rho, std::size_t K,
                                   RngState& rng) {
    if (K < 2) throw std::invalid_argument("apply_label_noise: K must be >= 2");
    if (rho < 0.0 || rho >= 1.0 - 1.0 / static_cast<double>(K))
        throw std::invalid_argument("apply_label_noise: rho " + fmt_g17(rho) +
                                    " outside [0, 1 - 1/K)");
    for (int v : y)
        if (v < 0 || static_cast<std::size_t>(v) >= K)
            throw std::invalid_argument("apply_label_noise: label " + std::to_string(v) +
                                        " out of range for K = " + std::to_string(K));
    if (rho == 0.0) return y;  // identity channel consumes no randomness
    std::vector<int> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (rng.next_unit() < rho) {
            std::size_t k = rng.next_below(K - 1);
            out[i] = static_cast<int>(k >= static_cast<std::size_t>(y[i]) ? k + 1 : k);
        } else {
            out[i] = y[i];
        }
    }
    return out;
}

LabeledDataset resample_by_class(const LabeledDataset& ds, RngState& rng) {
    if (ds.n() == 0) throw std::invalid_argument("resample_by_class: empty dataset");
    std::vector<std::vector<std::size_t>> members(ds.A);
    for (std::size_t i = 0; i < ds.n(); ++i) members[static_cast<std::size_t>(ds.Y[i])].push_back(i);
    // classes present in the data participate; a declared class with no
    // samples is an error unless the dataset is single-class by construction
    std::vector<std::size_t> present;
    for (std::size_t c = 0; c < ds.A; ++c)
        if (!members[c].empty()) present.push_back(c);
    if (present.size() != ds.A && present.size() != 1)
        throw std::invalid_argument("resample_by_class: class " +
                                    std::to_string([&] {
                                        for (std::size_t c = 0; c < ds.A; ++c)
                                            if (members[c].empty()) return c;
                                        return ds.A;
                                    }()) +
                                    " has no samples");
    std::vector<std::size_t> pick(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i) {
        std::size_t c = present[rng.next_below(present.size())];
        pick[i] = members[c][rng.next_below(members[c].size())];
    }
    LabeledDataset out;
    out.A = ds.A;
    out.B = ds.B;
    out.X = take_rows(ds.X, pick);
    out.Y.resize(ds.n());
    out.Z.resize(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i) {
        out.Y[i] = ds.Y[pick[i]];
        out.Z[i] = ds.Z[pick[i]];
    }
    return out;
}

void save_csv(const LabeledDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_csv: cannot open " + path);
    for (std::size_t j = 0; j < ds.X.cols(); ++j) out << "x" << j << ",";
    out << "y,z\n";
    for (std::size_t i = 0; i < ds.n(); ++i) {
        for (std::size_t j = 0; j < ds.X.cols(); ++j) out << fmt_g17(ds.X(i, j)) << ",";
        out << ds.Y[i] << "," << ds.Z[i] << "\n";
    }
    if (!out) throw std::runtime_error("save_csv: write failure on " + path);
}

LabeledDataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_csv: empty file " + path);
    auto header = split(line, ',');
    if (header.size() < 3)
        throw std::runtime_error("load_csv: header needs x columns plus y,z, got '" + line + "'");
    std::size_t d = header.size() - 2;
    for (std::size_t j = 0; j < d; ++j)
        if (header[j] != "x" + std::to_string(j))
            throw std::runtime_error("load_csv: expected column x" + std::to_string(j) + ", got '" +
                                     header[j] + "'");
    if (header[d] != "y") throw std::runtime_error("load_csv: missing column y");
    if (header[d + 1] != "z") throw std::runtime_error("load_csv: missing column z");

    std::vector<double> xdata;
    std::vector<int> ys, zs;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto parts = split(line, ',');
        if (parts.size() != d + 2)
            throw std::runtime_error("load_csv: line " + std::to_string(lineno) + ": expected " +
                                     std::to_string(d + 2) + " fields, got " +
                                     std::to_string(parts.size()));
        std::string ctx = "load_csv: line " + std::to_string(lineno);
        for (std::size_t j = 0; j < d; ++j) xdata.push_back(parse_double(parts[j], ctx));
        long long y = parse_int(parts[d], ctx);
        long long z = parse_int(parts[d + 1], ctx);
        if (y < 0 || z < 0)
            throw std::runtime_error(ctx + ": negative label");
        ys.push_back(static_cast<int>(y));
        zs.push_back(static_cast<int>(z));
    }
    if (ys.empty()) throw std::runtime_error("load_csv: no data rows in " + path);
    LabeledDataset ds;
    ds.X = Matrix(ys.size(), d, std::move(xdata));
    ds.Y = std::move(ys);
    ds.Z = std::move(zs);
    int maxy = 0, maxz = 0;
    for (std::size_t i = 0; i < ds.Y.size(); ++i) {
        maxy = std::max(maxy, ds.Y[i]);
        maxz = std::max(maxz, ds.Z[i]);
    }
    ds.A = static_cast<std::size_t>(maxy) + 1;
    ds.B = static_cast<std::size_t>(maxz) + 1;
    return ds;
}

}  // namespace cobias
