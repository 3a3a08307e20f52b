#include "camel/paramset.hpp"

#include <algorithm>
#include <cmath>

namespace camel {

void ParamSet::add(std::string name, CTensor value) {
    if (contains(name)) throw std::invalid_argument("ParamSet: duplicate parameter '" + name + "'");
    entries_.emplace_back(std::move(name), std::move(value));
}

bool ParamSet::contains(const std::string& name) const {
    return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.first == name; });
}

std::size_t ParamSet::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < entries_.size(); ++i)
        if (entries_[i].first == name) return i;
    throw std::out_of_range("ParamSet: no parameter named '" + name + "'");
}

const CTensor& ParamSet::get(const std::string& name) const { return entries_[index_of(name)].second; }
CTensor& ParamSet::get(const std::string& name) { return entries_[index_of(name)].second; }

std::size_t ParamSet::numel() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.second.size();
    return n;
}

void ParamSet::require_same_layout(const ParamSet& o, const char* op) const {
    if (o.size() != size()) {
        throw ShapeError(std::string(op) + ": parameter count " + std::to_string(size()) + " vs " +
                         std::to_string(o.size()));
    }
    for (std::size_t i = 0; i < size(); ++i) {
        if (entries_[i].first != o.entries_[i].first || entries_[i].second.shape() != o.entries_[i].second.shape()) {
            throw ShapeError(std::string(op) + ": parameter '" + entries_[i].first + "' " +
                             shape_str(entries_[i].second.shape()) + " vs '" + o.entries_[i].first + "' " +
                             shape_str(o.entries_[i].second.shape()));
        }
    }
}

ParamSet ParamSet::zeros_like() const {
    ParamSet out;
    for (const auto& [n, t] : entries_) out.add(n, CTensor(t.shape()));
    return out;
}

ParamSet ParamSet::with_values(std::vector<CTensor> values) const {
    if (values.size() != size()) throw ShapeError("ParamSet::with_values: wrong number of tensors");
    ParamSet out;
    for (std::size_t i = 0; i < size(); ++i) {
        require_same_shape(entries_[i].second, values[i], "ParamSet::with_values");
        out.add(entries_[i].first, std::move(values[i]));
    }
    return out;
}

ParamSet ParamSet::operator+(const ParamSet& o) const {
    require_same_layout(o, "ParamSet +");
    ParamSet out;
    for (std::size_t i = 0; i < size(); ++i) out.add(entries_[i].first, camel::add(tensor(i), o.tensor(i)));
    return out;
}

ParamSet ParamSet::operator-(const ParamSet& o) const {
    require_same_layout(o, "ParamSet -");
    ParamSet out;
    for (std::size_t i = 0; i < size(); ++i) out.add(entries_[i].first, camel::sub(tensor(i), o.tensor(i)));
    return out;
}

ParamSet ParamSet::scaled(cplx s) const {
    ParamSet out;
    for (const auto& [n, t] : entries_) out.add(n, camel::scale(t, s));
    return out;
}

ParamSet ParamSet::conjugated() const {
    ParamSet out;
    for (const auto& [n, t] : entries_) out.add(n, camel::conj(t));
    return out;
}

ParamSet ParamSet::real_projected() const {
    ParamSet out;
    for (const auto& [n, t] : entries_) out.add(n, camel::real_part(t));
    return out;
}

cplx ParamSet::vdot(const ParamSet& o) const {
    require_same_layout(o, "ParamSet::vdot");
    cplx s = 0.0;
    for (std::size_t i = 0; i < size(); ++i) s += camel::vdot(tensor(i), o.tensor(i));
    return s;
}

double ParamSet::norm() const {
    double s = 0.0;
    for (const auto& e : entries_)
        for (const auto& z : e.second.data()) s += std::norm(z);
    return std::sqrt(s);
}

double ParamSet::max_abs_diff(const ParamSet& o) const {
    require_same_layout(o, "ParamSet::max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < size(); ++i) m = std::max(m, camel::max_abs_diff(tensor(i), o.tensor(i)));
    return m;
}

bool ParamSet::all_finite() const {
    return std::all_of(entries_.begin(), entries_.end(), [](const Entry& e) { return e.second.all_finite(); });
}

std::vector<cplx> ParamSet::flatten() const {
    std::vector<cplx> flat;
    flat.reserve(numel());
    for (const auto& e : entries_) flat.insert(flat.end(), e.second.data().begin(), e.second.data().end());
    return flat;
}

ParamSet ParamSet::unflatten(const std::vector<cplx>& flat) const {
    if (flat.size() != numel()) throw ShapeError("ParamSet::unflatten: expected " + std::to_string(numel()) + " values");
    ParamSet out;
    std::size_t off = 0;
    for (const auto& [n, t] : entries_) {
        std::vector<cplx> d(flat.begin() + static_cast<std::ptrdiff_t>(off),
                            flat.begin() + static_cast<std::ptrdiff_t>(off + t.size()));
        off += t.size();
        out.add(n, CTensor(t.shape(), std::move(d)));
    }
    return out;
}

std::vector<ad::Var> ParamSet::to_leaves(ad::Tape& tape, bool requires_grad) const {
    std::vector<ad::Var> out;
    out.reserve(size());
    for (const auto& e : entries_) out.push_back(tape.leaf(e.second, requires_grad));
    return out;
}

}  // namespace camel
