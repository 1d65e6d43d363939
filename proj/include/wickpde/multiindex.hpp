#pragma once

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wickpde {

enum class DecompositionMode;

/// A finitely supported sequence of nonnegative integer exponents indexed by
/// coordinates 1, 2, 3, ...  Stored sparsely as (coordinate, exponent) pairs:
/// coordinates strictly increasing, zero exponents never stored, so equality
/// is structural on the canonical form.
class MultiIndex {
 public:
  struct Entry {
    int coord;  // >= 1
    int exp;    // >= 1
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  /// The zero multi-index.
  MultiIndex() = default;

  /// Dense construction: MultiIndex{1,0,2} has exponent 1 at coordinate 1 and
  /// exponent 2 at coordinate 3.
  MultiIndex(std::initializer_list<int> dense_exponents);
  static MultiIndex from_dense(std::span<const int> exponents);
  static MultiIndex unit(int coord, int exp = 1);

  const std::vector<Entry>& entries() const { return entries_; }
  bool is_zero() const { return entries_.empty(); }

  /// |alpha| = sum of exponents.
  int order() const;
  int exponent(int coord) const;
  int max_coord() const;  // 0 for the zero index
  std::vector<int> dense(int m = 0) const;

  /// alpha! = prod_i alpha_i!
  double factorial() const;

  /// log (2N)^alpha = sum_i alpha_i log(2i).  Weights are always combined in
  /// log space; exponentiation happens on demand.
  double log_weight_2n() const;
  /// (2N)^alpha; throws NumericalError when the product exceeds double range.
  double weight_2n() const;
  /// (2N)^{e * alpha}
  double weight_2n_pow(double e) const;

  std::string str() const;  // "(1,0,2)", "(0)" for the zero index

  friend bool operator==(const MultiIndex&, const MultiIndex&) = default;

 private:
  struct FromEntriesTag {};
  MultiIndex(FromEntriesTag, std::vector<Entry> es) : entries_(std::move(es)) {}

  friend MultiIndex add(const MultiIndex&, const MultiIndex&);
  friend std::optional<MultiIndex> try_subtract(const MultiIndex&, const MultiIndex&);
  friend std::uint64_t count_decompositions(const MultiIndex&, int, DecompositionMode);

  std::vector<Entry> entries_;
};

MultiIndex add(const MultiIndex& a, const MultiIndex& b);
inline MultiIndex operator+(const MultiIndex& a, const MultiIndex& b) { return add(a, b); }

/// gamma with b + gamma = a when b <= a componentwise; nullopt otherwise.
std::optional<MultiIndex> try_subtract(const MultiIndex& a, const MultiIndex& b);

/// Componentwise partial order a_k <= b_k for all k.
bool leq(const MultiIndex& a, const MultiIndex& b);
bool strictly_less(const MultiIndex& a, const MultiIndex& b);

/// Total order used for enumeration, map keys and all reports: ascending
/// |alpha|, ties broken coordinate-wise with the larger leading exponent
/// first, so (1,0) precedes (0,1).
bool canonical_less(const MultiIndex& a, const MultiIndex& b);

struct CanonicalLess {
  bool operator()(const MultiIndex& a, const MultiIndex& b) const {
    return canonical_less(a, b);
  }
};

enum class TruncationShape { TotalDegree, Box };

/// Finite slice of the index set: coordinates restricted to 1..m, degrees
/// capped by n either in total (|alpha| <= n) or per coordinate (alpha_i <= n).
struct TruncationSpec {
  int m = 1;
  int n = 0;
  TruncationShape shape = TruncationShape::TotalDegree;

  bool admits(const MultiIndex& a) const;
  int max_order() const;        // largest admitted |alpha|
  std::uint64_t count() const;  // admitted index count, saturating at uint64 max
  void validate() const;        // m >= 1, n >= 0

  friend bool operator==(const TruncationSpec&, const TruncationSpec&) = default;
};

/// All admitted indices in canonical order (always includes the zero index).
/// Throws ValidationError when the count exceeds the enumeration cap.
std::vector<MultiIndex> enumerate_indices(const TruncationSpec& spec);

enum class DecompositionMode { Nonzero, StrictlySmaller };

/// Number of ORDERED k-tuples (theta_1,...,theta_k) of nonzero multi-indices
/// with sum alpha; in StrictlySmaller mode each theta_i must also differ from
/// alpha.  Exact, memoized per call.  Throws NumericalError on uint64 overflow.
std::uint64_t count_decompositions(const MultiIndex& alpha, int k, DecompositionMode mode);

struct Lemma1Check {
  MultiIndex alpha;
  int k = 0;
  std::uint64_t count = 0;
  double bound = 0;
  double ratio = 0;
};

struct Lemma1Report {
  bool pass = true;
  std::uint64_t checks = 0;
  double worst_ratio = 0.0;
  Lemma1Check worst;
  std::vector<Lemma1Check> violations;
};

/// Checks N(alpha,k) <= 2^{k|alpha|} for every admitted alpha and 1 <= k <= |alpha|.
Lemma1Report verify_lemma1a(const TruncationSpec& spec);

/// Partial sum of (2N)^{-p alpha} over the admitted set.  Box specs too large
/// to enumerate are evaluated through the exact per-coordinate factorization.
double zeta_sum(double p, const TruncationSpec& spec);

/// prod_{i=1}^m sum_{j=0}^n (2i)^{-p j} -- the factorized form of the Box sum.
double zeta_box_product(double p, int m, int n);

/// Smallest s >= 0 with c^{|alpha|} <= (2N)^{s alpha} for all alpha; equals
/// max(0, log2 c) because every weight factor 2i is at least 2.
double find_s(double c);

struct FindSCheck {
  bool pass = true;
  double worst_margin = 0.0;  // min over alpha of s*log w(alpha) - |alpha|*log c
  MultiIndex worst_alpha;
};

/// Scans the admitted set verifying c^{|alpha|} <= (2N)^{s alpha}.
FindSCheck check_find_s(double c, double s, const TruncationSpec& spec);

}  // namespace wickpde
