#ifndef FASTSLOW_TIME_POLYNOMIAL_HPP
#define FASTSLOW_TIME_POLYNOMIAL_HPP

#include <vector>

#include "fastslow/jet.hpp"

namespace fsm {

/// Polynomial in an auxiliary time t whose coefficients are jets in the phase variables.
/// Coefficient k multiplies t^k. Time degree is not truncated; jet degree is.
template <typename Scalar>
class TimePolynomial {
 public:
  TimePolynomial() = default;
  explicit TimePolynomial(Jet<Scalar> c0) { coeffs_.push_back(std::move(c0)); }
  explicit TimePolynomial(std::vector<Jet<Scalar>> coeffs) : coeffs_(std::move(coeffs)) {}

  int time_degree() const { return static_cast<int>(coeffs_.size()) - 1; }
  const std::vector<Jet<Scalar>>& coeffs() const { return coeffs_; }
  const Jet<Scalar>& operator[](int k) const { return coeffs_[static_cast<std::size_t>(k)]; }

  TimePolynomial& operator+=(const TimePolynomial& o) {
    if (coeffs_.empty()) return *this = o;
    if (o.coeffs_.empty()) return *this;
    const Jet<Scalar> zero(coeffs_.front().num_vars(), coeffs_.front().order());
    if (coeffs_.size() < o.coeffs_.size()) coeffs_.resize(o.coeffs_.size(), zero);
    for (std::size_t k = 0; k < o.coeffs_.size(); ++k) coeffs_[k] += o.coeffs_[k];
    return *this;
  }

  friend TimePolynomial operator+(TimePolynomial a, const TimePolynomial& b) { return a += b; }

  friend TimePolynomial operator*(Scalar s, TimePolynomial a) {
    for (auto& c : a.coeffs_) c *= s;
    return a;
  }

  friend TimePolynomial operator*(const TimePolynomial& a, const TimePolynomial& b) {
    if (a.coeffs_.empty() || b.coeffs_.empty()) return {};
    const Jet<Scalar> zero(a.coeffs_.front().num_vars(), a.coeffs_.front().order());
    std::vector<Jet<Scalar>> out(a.coeffs_.size() + b.coeffs_.size() - 1, zero);
    for (std::size_t i = 0; i < a.coeffs_.size(); ++i) {
      if (a.coeffs_[i].is_zero()) continue;
      for (std::size_t j = 0; j < b.coeffs_.size(); ++j) {
        if (b.coeffs_[j].is_zero()) continue;
        out[i + j] += a.coeffs_[i] * b.coeffs_[j];
      }
    }
    TimePolynomial r(std::move(out));
    r.trim();
    return r;
  }

  /// Antiderivative vanishing at t = 0.
  TimePolynomial integral() const {
    if (coeffs_.empty()) return {};
    std::vector<Jet<Scalar>> out;
    out.push_back(Jet<Scalar>(coeffs_.front().num_vars(), coeffs_.front().order()));
    for (std::size_t k = 0; k < coeffs_.size(); ++k) out.push_back(coeffs_[k] * (Scalar(1) / Scalar(k + 1)));
    return TimePolynomial(std::move(out));
  }

  Jet<Scalar> at(Scalar t) const {
    Jet<Scalar> acc = coeffs_.back();
    for (int k = time_degree() - 1; k >= 0; --k) {
      acc *= t;
      acc += coeffs_[static_cast<std::size_t>(k)];
    }
    return acc;
  }

  void trim() {
    while (coeffs_.size() > 1 && coeffs_.back().is_zero()) coeffs_.pop_back();
  }

 private:
  std::vector<Jet<Scalar>> coeffs_;
};

template <typename Scalar>
using TimePolynomialVector = std::vector<TimePolynomial<Scalar>>;

/// Each component of `outer` evaluated on the time-dependent jets `inner`.
template <typename Scalar>
TimePolynomialVector<Scalar> compose_time(const JetVector<Scalar>& outer, const TimePolynomialVector<Scalar>& inner) {
  const auto& ref = inner.front()[0];
  const TimePolynomial<Scalar> one(Jet<Scalar>::constant(ref.num_vars(), ref.order(), Scalar(1)));
  TimePolynomialVector<Scalar> out;
  for (const auto& o : outer)
    out.push_back(compose_into<TimePolynomial<Scalar>, Scalar>(o, std::span<const TimePolynomial<Scalar>>(inner), one));
  return out;
}

}  // namespace fsm

#endif
