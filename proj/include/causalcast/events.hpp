#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "causalcast/timeutil.hpp"

namespace causalcast {

struct RawEventText {
    std::string event_id;
    std::string text;  // non-empty
    Minutes report_time = 0;
    std::string source;
};

enum class EventType : uint8_t { Accident, Construction, Hazard, RoadClosure, TrafficControl };

constexpr std::array<EventType, 5> kAllEventTypes = {
    EventType::Accident, EventType::Construction, EventType::Hazard,
    EventType::RoadClosure, EventType::TrafficControl};

const char* to_string(EventType t);
EventType event_type_from_string(const std::string& s);

/// A structurized and quantified traffic event. All integer scores are on
/// the 1-5 scale; capacity_reduction is the estimated fraction of capacity
/// lost in [0, 1].
struct EventRecord {
    std::string event_id;
    EventType event_type = EventType::Accident;
    Minutes onset = 0;
    std::string segment_id;
    int severity = 2;
    int danger = 2;
    int duration_score = 2;
    int impact_scope = 2;
    double capacity_reduction = 0.2;
    double expected_duration_min = 60.0;

    /// Throws InvalidRecord on any invariant violation.
    void validate() const;
};

/// Stage-1 output: the attributes needed to anchor an event in space/time.
struct PartialEvent {
    EventType event_type = EventType::Accident;
    Minutes onset = 0;
    std::string segment_id;
};

/// Keyword rules used by the deterministic extractor. Shipped as a versioned
/// JSON file (config/rubric.json) so quantification is reproducible without
/// any language-model service; the builtin table is identical to the shipped
/// file.
///
/// Score merging: every matching rule contributes its settings and the
/// strongest signal wins (max for scores and capacity). Unmatched fields
/// fall back to the documented defaults (2 / 2 / 2 / 2 / 0.2).
struct Rubric {
    struct ScoreRule {
        std::string keyword;  // matched case-insensitively on word boundaries
        std::optional<int> severity, danger, duration_score, impact_scope;
        std::optional<double> capacity_reduction;
    };

    std::string version;
    std::vector<std::pair<std::string, EventType>> type_keywords;  // priority order
    std::vector<ScoreRule> score_rules;
    // duration_score (1-5) -> expected event duration in minutes
    std::array<double, 5> duration_minutes_by_score = {20, 60, 120, 240, 480};

    static Rubric builtin();
    static Rubric load(const std::string& path);
    void save(const std::string& path) const;
};

/// Optional mapping from road/place names to segment ids, for texts that do
/// not carry an explicit "S<number>" token.
using LocationTable = std::map<std::string, std::string>;

/// Stage 1: resolve event type, onset, and segment. Throws
/// UnclassifiableEvent when no type keyword matches (never guesses) and
/// MissingLocation when no segment token resolves.
PartialEvent structurize(const RawEventText& raw, const Rubric& rubric,
                         const LocationTable& locations = {});

/// Stage 2: populate the five quantitative fields from rubric keywords.
/// Total: unmatched fields take the defaults.
EventRecord quantify(const PartialEvent& partial, const RawEventText& raw,
                     const Rubric& rubric);

/// Common interface for extraction backends. Downstream behavior depends
/// only on the returned EventRecord, never on which backend produced it.
class Extractor {
public:
    virtual ~Extractor() = default;
    virtual EventRecord extract(const RawEventText& raw) = 0;
};

/// Deterministic rule-based backend: identical text gives identical records.
class RuleBasedExtractor : public Extractor {
public:
    explicit RuleBasedExtractor(Rubric rubric = Rubric::builtin(),
                                LocationTable locations = {})
        : rubric_(std::move(rubric)), locations_(std::move(locations)) {}

    EventRecord extract(const RawEventText& raw) override {
        return quantify(structurize(raw, rubric_, locations_), raw, rubric_);
    }

private:
    Rubric rubric_;
    LocationTable locations_;
};

// JSON Lines IO. Field names are part of the external contract:
// raw:    {"event_id","text","report_time","source"}
// record: {"event_id","event_type","onset","segment_id","severity","danger",
//          "duration_score","impact_scope","capacity_reduction",
//          "expected_duration_min"}
std::vector<RawEventText> read_raw_events_jsonl(const std::string& path);
void write_raw_events_jsonl(const std::string& path, const std::vector<RawEventText>& raws);
std::vector<EventRecord> read_event_records_jsonl(const std::string& path);
void write_event_records_jsonl(const std::string& path, const std::vector<EventRecord>& records);

std::string to_json_line(const EventRecord& r);
EventRecord event_record_from_json(const std::string& line);

}  // namespace causalcast
