#pragma once

#include <string>
#include <utility>
#include <vector>

#include "camel/ctensor.hpp"
#include "camel/tape.hpp"

namespace camel {

/// Ordered, named collection of complex parameter tensors. Iteration order is insertion order.
class ParamSet {
public:
    using Entry = std::pair<std::string, CTensor>;

    ParamSet() = default;

    void add(std::string name, CTensor value);
    bool contains(const std::string& name) const;
    const CTensor& get(const std::string& name) const;
    CTensor& get(const std::string& name);
    std::size_t index_of(const std::string& name) const;

    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    const Entry& operator[](std::size_t i) const { return entries_[i]; }
    CTensor& tensor(std::size_t i) { return entries_[i].second; }
    const CTensor& tensor(std::size_t i) const { return entries_[i].second; }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

    /// Total number of complex scalars.
    std::size_t numel() const;

    /// Same names and shapes, all zeros.
    ParamSet zeros_like() const;
    /// Same names and shapes with new values, in order.
    ParamSet with_values(std::vector<CTensor> values) const;

    /// Elementwise; throws ShapeError when layouts disagree.
    ParamSet operator+(const ParamSet& o) const;
    ParamSet operator-(const ParamSet& o) const;
    ParamSet scaled(cplx s) const;
    ParamSet conjugated() const;
    /// Drops imaginary parts.
    ParamSet real_projected() const;

    /// sum_k conj(this_k) o_k over all tensors.
    cplx vdot(const ParamSet& o) const;
    double norm() const;
    double max_abs_diff(const ParamSet& o) const;
    bool all_finite() const;

    /// Flatten all tensors into one vector in order.
    std::vector<cplx> flatten() const;
    ParamSet unflatten(const std::vector<cplx>& flat) const;

    /// Register every tensor as a differentiable leaf on `tape`.
    std::vector<ad::Var> to_leaves(ad::Tape& tape, bool requires_grad = true) const;

    void require_same_layout(const ParamSet& o, const char* op) const;

    friend bool operator==(const ParamSet& a, const ParamSet& b) { return a.entries_ == b.entries_; }

private:
    std::vector<Entry> entries_;
};

}  // namespace camel
