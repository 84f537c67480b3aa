#ifndef TOROIDAL_ORACLE_HPP
#define TOROIDAL_ORACLE_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "toroidal/engines.hpp"
#include "toroidal/forms.hpp"
#include "toroidal/rational.hpp"

namespace toroidal {

// ---------------------------------------------------------------------------
// Exact-rational evaluation
// ---------------------------------------------------------------------------

struct SamplePoint {
    std::array<Rat, 3> coords;            // all nonzero
    std::map<std::string, Rat> constants; // Zero -> 0, Nonzero/Generic -> nonzero
};

// Unit series instantiation for sampling: gamma(args) = 1 + sum of args,
// a unit near the origin that still exercises variable dependence.
Rat evaluate_row(const LocalForm& form, int row, const SamplePoint& point);
std::array<Rat, 3> evaluate(const LocalForm& form, const SamplePoint& point);

// Draws a sample consistent with the constant classes appearing in the trace
// branch: coordinates and Nonzero/Generic constants are positive rationals
// with numerator and denominator in [1, 97].
SamplePoint draw_sample(Rng& rng, const std::vector<std::string>& constant_labels,
                        const std::map<std::string, ConstStatus>& statuses);

// ---------------------------------------------------------------------------
// Chain verification
// ---------------------------------------------------------------------------

struct Mismatch {
    int step_index = 0;
    int row = 0;
    std::string expected, actual;       // exact rationals, as strings
    std::string witness;                // the sample point
};

struct VerifyReport {
    bool ok = true;
    std::uint64_t seed = 0;
    long long samples_per_step = 0;
    long long steps_checked = 0;
    std::vector<Mismatch> mismatches;
};

// For every substitution step and `samples` random points in the new
// coordinates, checks evaluate(before, chart(point)) == evaluate(after, point)
// exactly; passage and recentring steps are checked by the corresponding
// exact identities. Zero tolerance.
VerifyReport verify_chain(const Trace& trace, long long samples, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Matrix cross-checks
// ---------------------------------------------------------------------------

struct MatrixReport {
    bool ok = true;
    long long steps_checked = 0;
    std::vector<std::string> failures;
};

// Re-proves exponent functoriality independently: E' = E*S entrywise on each
// substitution step, and det(E') = det(E)*det(S) on trivial-factor forms.
MatrixReport cross_check_matrix(const TraceStep& step);
MatrixReport cross_check_matrix(const Trace& trace);

// ---------------------------------------------------------------------------
// Golden case tables
// ---------------------------------------------------------------------------

struct ExpectedDisposition {
    DispositionKind kind = DispositionKind::Toroidal;
    int source_arity = 0;       // for toroidal rows
    int target_arity = 0;
    std::string pattern;        // for unresolved rows: continuing pattern id
};

struct GoldenRow {
    char lemma;                // 'A' or 'B'
    std::string pattern;       // input pattern id
    std::string chart;         // chart id within the blow-up
    std::string branch;        // branch condition, paper-style
    std::string label;         // stated outcome, e.g. "3-point maps to a 3-point"
    LocalForm instance;        // concrete exemplar of the input pattern
    Center center;
    std::vector<BranchAssignment> assignment;  // constant classes selecting the branch
    ExpectedDisposition expected;
};

// Machine-readable table of every enumerated single blow-up outcome of the
// two pipelines. Total: every (pattern, chart, branch) reachable by the
// engines appears exactly once.
std::vector<GoldenRow> golden_case_table(char lemma);

// Runs one golden row through substitute + pass_to_target + classify and
// compares the disposition; returns an error message on mismatch.
std::optional<std::string> check_golden_row(const GoldenRow& row, Trace* trace_out = nullptr);

}  // namespace toroidal

#endif
