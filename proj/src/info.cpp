#include "cobias/info.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "cobias/textio.hpp"

namespace cobias {

namespace {

std::size_t product(const std::vector<std::size_t>& cards) {
    std::size_t p = 1;
    for (std::size_t c : cards) p *= c;
    return p;
}

double clamp_mi(double v, const char* what) {
    if (v < -1e-9)
        throw std::runtime_error(std::string(what) + ": negative value " + fmt_g17(v) +
                                 " exceeds numerical tolerance");
    return v < 0.0 ? 0.0 : v;
}

}  // namespace

ContingencyTable::ContingencyTable(std::vector<std::size_t> cards, std::vector<double> probs)
    : cards_(std::move(cards)), probs_(std::move(probs)) {}

std::size_t ContingencyTable::index(const std::vector<std::size_t>& idx) const {
    std::size_t flat = 0;
    for (std::size_t a = 0; a < cards_.size(); ++a) flat = flat * cards_[a] + idx[a];
    return flat;
}

ContingencyTable ContingencyTable::from_probs(std::vector<std::size_t> cards,
                                              std::vector<double> probs) {
    if (cards.size() != 2 && cards.size() != 3)
        throw std::invalid_argument("ContingencyTable: arity must be 2 or 3, got " +
                                    std::to_string(cards.size()));
    for (std::size_t c : cards)
        if (c == 0) throw std::invalid_argument("ContingencyTable: zero cardinality axis");
    if (probs.size() != product(cards))
        throw std::invalid_argument("ContingencyTable: " + std::to_string(probs.size()) +
                                    " cells for cardinalities requiring " +
                                    std::to_string(product(cards)));
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0))
            throw std::invalid_argument("ContingencyTable: negative probability " + fmt_g17(p));
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6)
        throw std::invalid_argument("ContingencyTable: probabilities sum to " + fmt_g17(sum) +
                                    ", expected 1");
    for (double& p : probs) p /= sum;
    return ContingencyTable(std::move(cards), std::move(probs));
}

ContingencyTable ContingencyTable::from_counts(std::vector<std::size_t> cards,
                                               std::vector<std::size_t> counts) {
    std::size_t total = 0;
    for (std::size_t c : counts) total += c;
    if (total == 0) throw std::invalid_argument("ContingencyTable: no samples");
    std::vector<double> probs(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
        probs[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
    if (cards.size() != 2 && cards.size() != 3)
        throw std::invalid_argument("ContingencyTable: arity must be 2 or 3");
    if (probs.size() != product(cards))
        throw std::invalid_argument("ContingencyTable: count array does not match cardinalities");
    return ContingencyTable(std::move(cards), std::move(probs));
}

ContingencyTable ContingencyTable::from_samples(const std::vector<int>& u,
                                                const std::vector<int>& v, std::size_t card_u,
                                                std::size_t card_v) {
    if (u.size() != v.size())
        throw std::invalid_argument("from_samples: label vectors differ in length");
    std::vector<std::size_t> counts(card_u * card_v, 0);
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (u[i] < 0 || static_cast<std::size_t>(u[i]) >= card_u || v[i] < 0 ||
            static_cast<std::size_t>(v[i]) >= card_v)
            throw std::invalid_argument("from_samples: label out of range at row " +
                                        std::to_string(i));
        counts[static_cast<std::size_t>(u[i]) * card_v + static_cast<std::size_t>(v[i])]++;
    }
    return from_counts({card_u, card_v}, std::move(counts));
}

ContingencyTable ContingencyTable::from_samples(const std::vector<int>& u,
                                                const std::vector<int>& v,
                                                const std::vector<int>& w, std::size_t card_u,
                                                std::size_t card_v, std::size_t card_w) {
    if (u.size() != v.size() || u.size() != w.size())
        throw std::invalid_argument("from_samples: label vectors differ in length");
    std::vector<std::size_t> counts(card_u * card_v * card_w, 0);
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (u[i] < 0 || static_cast<std::size_t>(u[i]) >= card_u || v[i] < 0 ||
            static_cast<std::size_t>(v[i]) >= card_v || w[i] < 0 ||
            static_cast<std::size_t>(w[i]) >= card_w)
            throw std::invalid_argument("from_samples: label out of range at row " +
                                        std::to_string(i));
        counts[(static_cast<std::size_t>(u[i]) * card_v + static_cast<std::size_t>(v[i])) *
                   card_w +
               static_cast<std::size_t>(w[i])]++;
    }
    return from_counts({card_u, card_v, card_w}, std::move(counts));
}

double ContingencyTable::prob(std::size_t i, std::size_t j) const {
    if (arity() != 2) throw std::invalid_argument("prob(i,j) on arity-" + std::to_string(arity()));
    return probs_[index({i, j})];
}

double ContingencyTable::prob(std::size_t i, std::size_t j, std::size_t k) const {
    if (arity() != 3)
        throw std::invalid_argument("prob(i,j,k) on arity-" + std::to_string(arity()));
    return probs_[index({i, j, k})];
}

std::vector<double> ContingencyTable::marginal(std::size_t axis) const {
    if (axis >= arity()) throw std::invalid_argument("marginal: axis out of range");
    std::vector<double> out(cards_[axis], 0.0);
    std::vector<std::size_t> idx(arity(), 0);
    for (std::size_t flat = 0; flat < probs_.size(); ++flat) {
        std::size_t rem = flat;
        for (std::size_t a = arity(); a-- > 0;) {
            idx[a] = rem % cards_[a];
            rem /= cards_[a];
        }
        out[idx[axis]] += probs_[flat];
    }
    return out;
}

ContingencyTable ContingencyTable::marginalize_to(std::size_t axis_a, std::size_t axis_b) const {
    if (arity() != 3) throw std::invalid_argument("marginalize_to: table must be arity 3");
    if (axis_a >= 3 || axis_b >= 3 || axis_a == axis_b)
        throw std::invalid_argument("marginalize_to: invalid axis pair");
    std::vector<double> out(cards_[axis_a] * cards_[axis_b], 0.0);
    for (std::size_t i = 0; i < cards_[0]; ++i)
        for (std::size_t j = 0; j < cards_[1]; ++j)
            for (std::size_t k = 0; k < cards_[2]; ++k) {
                std::size_t pos[3] = {i, j, k};
                out[pos[axis_a] * cards_[axis_b] + pos[axis_b]] += probs_[index({i, j, k})];
            }
    return ContingencyTable({cards_[axis_a], cards_[axis_b]}, std::move(out));
}

void ContingencyTable::save_csv(std::ostream& out) const {
    out << (arity() == 2 ? "i,j,p\n" : "i,j,k,p\n");
    std::vector<std::size_t> idx(arity(), 0);
    for (std::size_t flat = 0; flat < probs_.size(); ++flat) {
        std::size_t rem = flat;
        for (std::size_t a = arity(); a-- > 0;) {
            idx[a] = rem % cards_[a];
            rem /= cards_[a];
        }
        for (std::size_t a = 0; a < arity(); ++a) out << idx[a] << ",";
        out << fmt_g17(probs_[flat]) << "\n";
    }
}

ContingencyTable ContingencyTable::load_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("table csv: empty file");
    std::size_t arity = split(line, ',').size() - 1;
    if (arity != 2 && arity != 3) throw std::runtime_error("table csv: header must be i,j[,k],p");
    struct Cell {
        std::vector<std::size_t> idx;
        double p;
    };
    std::vector<Cell> cells;
    std::vector<std::size_t> cards(arity, 0);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto parts = split(line, ',');
        if (parts.size() != arity + 1)
            throw std::runtime_error("table csv line " + std::to_string(lineno) + ": expected " +
                                     std::to_string(arity + 1) + " fields");
        Cell c;
        for (std::size_t a = 0; a < arity; ++a) {
            long long v = parse_int(parts[a], "table csv line " + std::to_string(lineno));
            if (v < 0) throw std::runtime_error("table csv line " + std::to_string(lineno) +
                                                ": negative index");
            c.idx.push_back(static_cast<std::size_t>(v));
            cards[a] = std::max(cards[a], static_cast<std::size_t>(v) + 1);
        }
        c.p = parse_double(parts[arity], "table csv line " + std::to_string(lineno));
        cells.push_back(std::move(c));
    }
    std::vector<double> probs(product(cards), 0.0);
    for (const auto& c : cells) {
        std::size_t flat = 0;
        for (std::size_t a = 0; a < arity; ++a) flat = flat * cards[a] + c.idx[a];
        probs[flat] = c.p;
    }
    return from_probs(std::move(cards), std::move(probs));
}

double entropy(const std::vector<double>& dist) {
    double h = 0.0;
    for (double p : dist) {
        if (p < 0.0) throw std::invalid_argument("entropy: negative probability");
        if (p > 0.0) h -= p * std::log(p);
    }
    return h < 0.0 ? 0.0 : h;
}

double entropy(const ContingencyTable& t, std::size_t axis) {
    return entropy(t.marginal(axis));
}

MIEstimate exact_mi(const ContingencyTable& t) {
    if (t.arity() != 2) throw std::invalid_argument("exact_mi: table must be arity 2");
    auto pu = t.marginal(0);
    auto pv = t.marginal(1);
    double mi = 0.0;
    for (std::size_t i = 0; i < pu.size(); ++i)
        for (std::size_t j = 0; j < pv.size(); ++j) {
            double p = t.prob(i, j);
            if (p > 0.0) mi += p * std::log(p / (pu[i] * pv[j]));
        }
    MIEstimate e;
    e.value = clamp_mi(mi, "exact_mi");
    e.estimator = Estimator::exact_discrete;
    e.is_lower_bound = false;
    return e;
}

MIEstimate exact_mi(const ContingencyTable& t, std::size_t n_samples, bool miller_madow) {
    MIEstimate e = exact_mi(t);
    e.n_samples = n_samples;
    if (miller_madow && n_samples > 0) {
        // I = H(U) + H(V) - H(U,V) with the Miller-Madow (m-1)/(2n) correction
        // applied to each entropy term
        auto nonzero = [](const std::vector<double>& d) {
            std::size_t m = 0;
            for (double p : d)
                if (p > 0.0) ++m;
            return static_cast<double>(m);
        };
        double mu = nonzero(t.marginal(0));
        double mv = nonzero(t.marginal(1));
        double muv = nonzero(t.probs());
        e.value += ((mu - 1.0) + (mv - 1.0) - (muv - 1.0)) / (2.0 * static_cast<double>(n_samples));
        if (e.value < 0.0) e.value = 0.0;
    }
    return e;
}

MIEstimate exact_conditional_mi(const ContingencyTable& t, std::size_t cond_axis) {
    if (t.arity() != 3) throw std::invalid_argument("exact_conditional_mi: table must be arity 3");
    if (cond_axis >= 3) throw std::invalid_argument("exact_conditional_mi: axis out of range");
    std::size_t axis_a = cond_axis == 0 ? 1 : 0;
    std::size_t axis_b = cond_axis == 2 ? 1 : 2;
    const auto& cards = t.cardinalities();
    auto pw = t.marginal(cond_axis);
    double cmi = 0.0;
    for (std::size_t w = 0; w < cards[cond_axis]; ++w) {
        if (pw[w] <= 0.0) continue;  // empty conditioning slice
        // conditional slice p(a,b | w)
        std::vector<double> slice(cards[axis_a] * cards[axis_b], 0.0);
        for (std::size_t a = 0; a < cards[axis_a]; ++a)
            for (std::size_t b = 0; b < cards[axis_b]; ++b) {
                std::size_t pos[3];
                pos[cond_axis] = w;
                pos[axis_a] = a;
                pos[axis_b] = b;
                slice[a * cards[axis_b] + b] = t.prob(pos[0], pos[1], pos[2]) / pw[w];
            }
        double sum = 0.0;
        for (double p : slice) sum += p;
        if (sum <= 0.0) continue;
        auto sl = ContingencyTable::from_probs({cards[axis_a], cards[axis_b]}, std::move(slice));
        cmi += pw[w] * exact_mi(sl).value;
    }
    MIEstimate e;
    e.value = clamp_mi(cmi, "exact_conditional_mi");
    e.estimator = Estimator::exact_discrete;
    e.is_lower_bound = false;
    return e;
}

double gaussian_mi_oracle(double rho) {
    if (!(std::abs(rho) < 1.0))
        throw std::invalid_argument("gaussian_mi_oracle: |rho| must be < 1, got " + fmt_g17(rho));
    double v = -0.5 * std::log(1.0 - rho * rho);
    return v < 0.0 ? 0.0 : v;
}

std::vector<NoiseCurvePoint> label_noise_mi_curve(const ContingencyTable& joint_yz,
                                                  const std::vector<double>& rhos, std::size_t K) {
    if (joint_yz.arity() != 2)
        throw std::invalid_argument("label_noise_mi_curve: joint must be arity 2 over (Y, Z)");
    if (K < 2) throw std::invalid_argument("label_noise_mi_curve: K must be >= 2");
    const std::size_t card_y = joint_yz.cardinalities()[0];
    const std::size_t card_z = joint_yz.cardinalities()[1];
    if (card_y > K)
        throw std::invalid_argument("label_noise_mi_curve: Y cardinality exceeds K");
    auto py = joint_yz.marginal(0);
    std::vector<NoiseCurvePoint> out;
    out.reserve(rhos.size());
    for (double rho : rhos) {
        if (rho < 0.0 || rho >= 1.0 - 1.0 / static_cast<double>(K))
            throw std::invalid_argument("label_noise_mi_curve: rho " + fmt_g17(rho) +
                                        " outside [0, 1 - 1/K)");
        double stay = 1.0 - rho;
        double move = rho / static_cast<double>(K - 1);
        // p(y~, z) and p(y, y~) under the channel
        std::vector<double> p_nz(K * card_z, 0.0);
        std::vector<double> p_yn(card_y * K, 0.0);
        for (std::size_t y = 0; y < card_y; ++y) {
            for (std::size_t yn = 0; yn < K; ++yn) {
                double ch = (yn == y) ? stay : move;
                if (ch == 0.0) continue;
                p_yn[y * K + yn] = py[y] * ch;
                for (std::size_t z = 0; z < card_z; ++z)
                    p_nz[yn * card_z + z] += ch * joint_yz.prob(y, z);
            }
        }
        NoiseCurvePoint pt;
        pt.rho = rho;
        pt.mi_z_ynoisy = exact_mi(ContingencyTable::from_probs({K, card_z}, p_nz)).value;
        pt.mi_y_ynoisy = exact_mi(ContingencyTable::from_probs({card_y, K}, p_yn)).value;
        if (pt.mi_y_ynoisy > 0.0)
            pt.ratio = pt.mi_z_ynoisy / pt.mi_y_ynoisy;
        out.push_back(pt);
    }
    return out;
}

}  // namespace cobias
