#ifndef TOROIDAL_SERIALIZE_HPP
#define TOROIDAL_SERIALIZE_HPP

#include <optional>
#include <string>

#include <json.hpp>

#include "toroidal/engines.hpp"
#include "toroidal/forms.hpp"
#include "toroidal/oracle.hpp"

namespace toroidal {

using Json = nlohmann::ordered_json;

struct ScenarioOptions {
    long long budget = -1;
    long long samples = 0;
    std::uint64_t seed = 1;
};

struct Scenario {
    int version = 1;
    std::string algorithm;  // classify | lemma_a | lemma_b | valuation | verify
    Fiber fiber;
    std::optional<ValuationState> valuation;
    std::optional<Json> trace;       // inline trace for verify scenarios
    std::string trace_path;          // or a path to one
    std::optional<Scene> scene;      // cuspidal adjacency input for classify
    ScenarioOptions options;
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Scenario files: throws ParseError on malformed JSON or missing fields,
// ValidationError when a form fails validate() (message names the field path).
Scenario parse_scenario(const Json& j);
Scenario load_scenario(const std::string& path);

Json form_to_json(const LocalForm& form);
LocalForm form_from_json(const Json& j, const std::string& path_for_errors);

Json trace_to_json(const Trace& trace);
Trace trace_from_json(const Json& j);

Json verify_report_to_json(const VerifyReport& report);
Json classification_to_json(const Classification& c);

std::string render_case_table(char lemma);  // deterministic markdown

// Atomic write: temp file in the target directory, then rename.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace toroidal

#endif
