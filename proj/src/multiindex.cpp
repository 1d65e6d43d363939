#include "wickpde/multiindex.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <utility>

#include "wickpde/util.hpp"

namespace wickpde {

namespace {

constexpr std::uint64_t kEnumerationCap = 4'000'000;

std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a)
    return std::numeric_limits<std::uint64_t>::max();
  return a * b;
}

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
  if (b > std::numeric_limits<std::uint64_t>::max() - a)
    throw NumericalError("count_decompositions: 64-bit counter overflow");
  return a + b;
}

}  // namespace

MultiIndex::MultiIndex(std::initializer_list<int> dense_exponents) {
  int coord = 0;
  for (int e : dense_exponents) {
    ++coord;
    if (e < 0) throw ValidationError("multi-index exponent must be nonnegative");
    if (e > 0) entries_.push_back({coord, e});
  }
}

MultiIndex MultiIndex::from_dense(std::span<const int> exponents) {
  MultiIndex a;
  for (std::size_t i = 0; i < exponents.size(); ++i) {
    if (exponents[i] < 0) throw ValidationError("multi-index exponent must be nonnegative");
    if (exponents[i] > 0) a.entries_.push_back({static_cast<int>(i) + 1, exponents[i]});
  }
  return a;
}

MultiIndex MultiIndex::unit(int coord, int exp) {
  if (coord < 1) throw ValidationError("multi-index coordinate must be positive");
  if (exp < 0) throw ValidationError("multi-index exponent must be nonnegative");
  MultiIndex a;
  if (exp > 0) a.entries_.push_back({coord, exp});
  return a;
}

int MultiIndex::order() const {
  int s = 0;
  for (const auto& e : entries_) s += e.exp;
  return s;
}

int MultiIndex::exponent(int coord) const {
  for (const auto& e : entries_) {
    if (e.coord == coord) return e.exp;
    if (e.coord > coord) break;
  }
  return 0;
}

int MultiIndex::max_coord() const { return entries_.empty() ? 0 : entries_.back().coord; }

std::vector<int> MultiIndex::dense(int m) const {
  std::vector<int> d(static_cast<std::size_t>(std::max(m, max_coord())), 0);
  for (const auto& e : entries_) d[static_cast<std::size_t>(e.coord) - 1] = e.exp;
  return d;
}

double MultiIndex::factorial() const {
  double f = 1.0;
  for (const auto& e : entries_)
    for (int j = 2; j <= e.exp; ++j) f *= j;
  return f;
}

double MultiIndex::log_weight_2n() const {
  double s = 0.0;
  for (const auto& e : entries_) s += e.exp * std::log(2.0 * e.coord);
  return s;
}

double MultiIndex::weight_2n() const {
  double lw = log_weight_2n();
  if (lw >= std::log(std::numeric_limits<double>::max()))
    throw NumericalError("(2N)^alpha overflows double range for " + str());
  return std::exp(lw);
}

double MultiIndex::weight_2n_pow(double e) const { return std::exp(e * log_weight_2n()); }

std::string MultiIndex::str() const {
  std::vector<int> d = dense(1);
  std::string s = "(";
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(d[i]);
  }
  s += ')';
  return s;
}

MultiIndex add(const MultiIndex& a, const MultiIndex& b) {
  std::vector<MultiIndex::Entry> out;
  out.reserve(a.entries_.size() + b.entries_.size());
  auto ia = a.entries_.begin(), ea = a.entries_.end();
  auto ib = b.entries_.begin(), eb = b.entries_.end();
  while (ia != ea || ib != eb) {
    if (ib == eb || (ia != ea && ia->coord < ib->coord)) {
      out.push_back(*ia++);
    } else if (ia == ea || ib->coord < ia->coord) {
      out.push_back(*ib++);
    } else {
      out.push_back({ia->coord, ia->exp + ib->exp});
      ++ia;
      ++ib;
    }
  }
  return MultiIndex(MultiIndex::FromEntriesTag{}, std::move(out));
}

std::optional<MultiIndex> try_subtract(const MultiIndex& a, const MultiIndex& b) {
  std::vector<MultiIndex::Entry> out;
  out.reserve(a.entries_.size());
  auto ia = a.entries_.begin(), ea = a.entries_.end();
  for (const auto& eb : b.entries_) {
    while (ia != ea && ia->coord < eb.coord) out.push_back(*ia++);
    if (ia == ea || ia->coord != eb.coord || ia->exp < eb.exp) return std::nullopt;
    if (ia->exp > eb.exp) out.push_back({ia->coord, ia->exp - eb.exp});
    ++ia;
  }
  while (ia != ea) out.push_back(*ia++);
  return MultiIndex(MultiIndex::FromEntriesTag{}, std::move(out));
}

bool leq(const MultiIndex& a, const MultiIndex& b) {
  auto ib = b.entries().begin(), eb = b.entries().end();
  for (const auto& ea : a.entries()) {
    while (ib != eb && ib->coord < ea.coord) ++ib;
    if (ib == eb || ib->coord != ea.coord || ib->exp < ea.exp) return false;
  }
  return true;
}

bool strictly_less(const MultiIndex& a, const MultiIndex& b) { return a != b && leq(a, b); }

bool canonical_less(const MultiIndex& a, const MultiIndex& b) {
  int oa = a.order(), ob = b.order();
  if (oa != ob) return oa < ob;
  // Same |alpha|: compare exponents coordinate by coordinate; the index with
  // the larger exponent at the first differing coordinate sorts earlier.
  auto ia = a.entries().begin(), ea = a.entries().end();
  auto ib = b.entries().begin(), eb = b.entries().end();
  while (ia != ea && ib != eb) {
    if (ia->coord != ib->coord) {
      // Whichever support starts earlier holds the nonzero exponent at the
      // first differing coordinate.
      return ia->coord < ib->coord;
    }
    if (ia->exp != ib->exp) return ia->exp > ib->exp;
    ++ia;
    ++ib;
  }
  // Equal entries so far; equal orders force both iterators to be exhausted.
  return false;
}

bool TruncationSpec::admits(const MultiIndex& a) const {
  if (a.max_coord() > m) return false;
  if (shape == TruncationShape::TotalDegree) return a.order() <= n;
  for (const auto& e : a.entries())
    if (e.exp > n) return false;
  return true;
}

int TruncationSpec::max_order() const {
  return shape == TruncationShape::TotalDegree ? n : m * n;
}

std::uint64_t TruncationSpec::count() const {
  if (shape == TruncationShape::Box) {
    std::uint64_t c = 1;
    for (int i = 0; i < m; ++i) c = saturating_mul(c, static_cast<std::uint64_t>(n) + 1);
    return c;
  }
  // binomial(m + n, n); after multiplying by (max(m,n) + j) the running
  // product is divisible by j
  std::uint64_t c = 1;
  for (int j = 1; j <= std::min(m, n); ++j) {
    c = saturating_mul(c, static_cast<std::uint64_t>(std::max(m, n)) + static_cast<std::uint64_t>(j));
    if (c == std::numeric_limits<std::uint64_t>::max()) return c;
    c /= static_cast<std::uint64_t>(j);
  }
  return c;
}

void TruncationSpec::validate() const {
  if (m < 1) throw ValidationError("truncation: m must be >= 1");
  if (n < 0) throw ValidationError("truncation: n must be >= 0");
}

std::vector<MultiIndex> enumerate_indices(const TruncationSpec& spec) {
  spec.validate();
  if (spec.count() > kEnumerationCap)
    throw ValidationError("truncation admits " + std::to_string(spec.count()) +
                          " indices, above the enumeration cap of " +
                          std::to_string(kEnumerationCap));
  std::vector<MultiIndex> out;
  out.reserve(spec.count());
  std::vector<int> dense(static_cast<std::size_t>(spec.m), 0);
  const bool total = spec.shape == TruncationShape::TotalDegree;
  std::function<void(int, int)> rec = [&](int coord, int budget) {
    if (coord == spec.m) {
      out.push_back(MultiIndex::from_dense(dense));
      return;
    }
    int cap = total ? budget : spec.n;
    for (int e = 0; e <= cap; ++e) {
      dense[static_cast<std::size_t>(coord)] = e;
      rec(coord + 1, total ? budget - e : budget);
    }
    dense[static_cast<std::size_t>(coord)] = 0;
  };
  rec(0, spec.n);
  std::sort(out.begin(), out.end(), canonical_less);
  return out;
}

std::uint64_t count_decompositions(const MultiIndex& alpha, int k, DecompositionMode mode) {
  if (k < 1) throw ValidationError("count_decompositions: k must be >= 1");
  const bool strict = mode == DecompositionMode::StrictlySmaller;
  struct KeyLess {
    bool operator()(const std::pair<int, MultiIndex>& a,
                    const std::pair<int, MultiIndex>& b) const {
      if (a.first != b.first) return a.first < b.first;
      return canonical_less(a.second, b.second);
    }
  };
  std::map<std::pair<int, MultiIndex>, std::uint64_t, KeyLess> memo;
  // theta runs over 0 < theta <= rem via an odometer on rem's support.  Parts
  // are nonzero and shrink rem strictly, so rem == alpha only at the root
  // call; the strict-mode exclusion of theta == alpha never reaches a
  // memoized subproblem.
  std::function<std::uint64_t(const MultiIndex&, int)> rec =
      [&](const MultiIndex& rem, int parts) -> std::uint64_t {
    if (parts == 0) return rem.is_zero() ? 1u : 0u;
    if (rem.is_zero() || rem.order() < parts) return 0;
    auto key = std::make_pair(parts, rem);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    const auto& ent = rem.entries_;
    std::vector<int> cur(ent.size(), 0);
    std::uint64_t total = 0;
    for (;;) {
      std::size_t pos = 0;
      while (pos < cur.size() && cur[pos] == ent[pos].exp) {
        cur[pos] = 0;
        ++pos;
      }
      if (pos == cur.size()) break;
      ++cur[pos];
      std::vector<MultiIndex::Entry> es;
      for (std::size_t i = 0; i < cur.size(); ++i)
        if (cur[i] > 0) es.push_back({ent[i].coord, cur[i]});
      MultiIndex theta(MultiIndex::FromEntriesTag{}, std::move(es));
      if (strict && theta == alpha) continue;
      total = checked_add(total, rec(*try_subtract(rem, theta), parts - 1));
    }
    memo.emplace(std::move(key), total);
    return total;
  };
  return rec(alpha, k);
}

Lemma1Report verify_lemma1a(const TruncationSpec& spec) {
  Lemma1Report rep;
  for (const MultiIndex& alpha : enumerate_indices(spec)) {
    for (int k = 1; k <= alpha.order(); ++k) {
      std::uint64_t n = count_decompositions(alpha, k, DecompositionMode::StrictlySmaller);
      double bound = (k * alpha.order() < 1024) ? std::ldexp(1.0, k * alpha.order())
                                                : std::numeric_limits<double>::infinity();
      double ratio = static_cast<double>(n) / bound;
      ++rep.checks;
      Lemma1Check chk{alpha, k, n, bound, ratio};
      if (ratio > rep.worst_ratio) {
        rep.worst_ratio = ratio;
        rep.worst = chk;
      }
      if (ratio > 1.0) {
        rep.pass = false;
        rep.violations.push_back(chk);
      }
    }
  }
  return rep;
}

double zeta_box_product(double p, int m, int n) {
  double prod = 1.0;
  for (int i = 1; i <= m; ++i) {
    double base = std::pow(2.0 * i, -p);
    double term = 1.0, sum = 0.0;
    for (int j = 0; j <= n; ++j) {
      sum += term;
      term *= base;
    }
    prod *= sum;
  }
  return prod;
}

double zeta_sum(double p, const TruncationSpec& spec) {
  spec.validate();
  if (spec.count() > kEnumerationCap) {
    if (spec.shape == TruncationShape::Box) return zeta_box_product(p, spec.m, spec.n);
    throw ValidationError("zeta_sum: TotalDegree truncation too large to enumerate");
  }
  double sum = 0.0;
  for (const MultiIndex& a : enumerate_indices(spec)) sum += a.weight_2n_pow(-p);
  return sum;
}

double find_s(double c) {
  if (!(c > 0)) throw ValidationError("find_s: c must be positive");
  return std::max(0.0, std::log2(c));
}

FindSCheck check_find_s(double c, double s, const TruncationSpec& spec) {
  FindSCheck chk;
  chk.worst_margin = std::numeric_limits<double>::infinity();
  const double logc = std::log(c);
  for (const MultiIndex& a : enumerate_indices(spec)) {
    // c^{|alpha|} <= (2N)^{s alpha}  <=>  |alpha| log c <= s log w(alpha)
    double margin = s * a.log_weight_2n() - a.order() * logc;
    if (margin < chk.worst_margin) {
      chk.worst_margin = margin;
      chk.worst_alpha = a;
    }
  }
  chk.pass = chk.worst_margin >= -1e-9;
  return chk;
}

}  // namespace wickpde
