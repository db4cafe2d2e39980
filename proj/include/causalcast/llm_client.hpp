#pragma once

#include <string>

#include "causalcast/events.hpp"

namespace causalcast {

/// Plain JSON-over-HTTP transport with templated prompts; no vendor
/// coupling. The endpoint receives {"prompt": <rendered template>, "stage":
/// "structurize"|"quantify"} and must answer with a JSON object carrying the
/// stage's fields directly:
///   structurize -> {"event_type","onset","segment_id"}
///   quantify    -> {"severity","danger","duration_score","impact_scope",
///                   "capacity_reduction","expected_duration_min"}
/// Out-of-range numeric fields are clamped into range with a warning on
/// stderr; responses that cannot be parsed at all are retried, then the
/// record is rejected with ExtractionFailed.
struct LlmConfig {
    std::string endpoint;        // http://host:port/path
    std::string prompt_dir;      // holds structurize.txt and quantify.txt
    int timeout_seconds = 30;    // per request
    int max_retries = 2;         // after the first attempt
    int max_in_flight = 4;       // bounded concurrent requests
    // Name of the environment variable holding the API credential; sent as
    // an Authorization: Bearer header when set.
    std::string api_key_env = "CAUSALCAST_API_KEY";
};

class LlmExtractor : public Extractor {
public:
    explicit LlmExtractor(LlmConfig config);

    /// Two-stage extraction. Throws ExtractionFailed after retries are
    /// exhausted; the caller may fall back to the rule-based extractor.
    EventRecord extract(const RawEventText& raw) override;

    /// Renders a prompt template: {{text}}, {{event_id}}, {{report_time}}
    /// placeholders are substituted.
    static std::string render_template(const std::string& tmpl, const RawEventText& raw);

private:
    std::string post_stage(const std::string& stage, const std::string& prompt);

    LlmConfig config_;
    std::string structurize_template_;
    std::string quantify_template_;
};

}  // namespace causalcast
