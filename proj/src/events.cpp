#include "causalcast/events.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "causalcast/common.hpp"
#include "json.hpp"

namespace causalcast {

using nlohmann::json;

const char* to_string(EventType t) {
    switch (t) {
        case EventType::Accident: return "Accident";
        case EventType::Construction: return "Construction";
        case EventType::Hazard: return "Hazard";
        case EventType::RoadClosure: return "RoadClosure";
        case EventType::TrafficControl: return "TrafficControl";
    }
    return "?";
}

EventType event_type_from_string(const std::string& s) {
    for (EventType t : kAllEventTypes) {
        if (s == to_string(t)) return t;
    }
    fail("ParseError", "unknown event type '" + s + "'");
}

void EventRecord::validate() const {
    auto score_ok = [](int v) { return v >= 1 && v <= 5; };
    if (!score_ok(severity) || !score_ok(danger) || !score_ok(duration_score) ||
        !score_ok(impact_scope)) {
        fail("InvalidRecord", "event " + event_id + ": scores must be in 1..5");
    }
    if (!(capacity_reduction >= 0.0 && capacity_reduction <= 1.0)) {
        fail("InvalidRecord", "event " + event_id + ": capacity_reduction out of [0,1]");
    }
    if (!(expected_duration_min > 0.0) || !std::isfinite(expected_duration_min)) {
        fail("InvalidRecord", "event " + event_id + ": bad expected_duration_min");
    }
    if (segment_id.empty()) {
        fail("InvalidRecord", "event " + event_id + ": empty segment_id");
    }
}

namespace {

std::string lower(const std::string& s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-';
}

// Case-insensitive phrase match on word boundaries.
bool contains_keyword(const std::string& text_lower, const std::string& keyword) {
    size_t pos = 0;
    while ((pos = text_lower.find(keyword, pos)) != std::string::npos) {
        const bool left_ok = pos == 0 || !is_word_char(text_lower[pos - 1]);
        const size_t end = pos + keyword.size();
        const bool right_ok = end >= text_lower.size() || !is_word_char(text_lower[end]);
        if (left_ok && right_ok) return true;
        pos += 1;
    }
    return false;
}

// "S12"-style segment token.
std::optional<std::string> find_segment_token(const std::string& text) {
    for (size_t i = 0; i < text.size(); ++i) {
        if ((text[i] == 'S' || text[i] == 's') && i + 1 < text.size() &&
            std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
            if (i > 0 && is_word_char(text[i - 1])) continue;
            size_t j = i + 1;
            while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
            if (j < text.size() && is_word_char(text[j])) continue;
            return "S" + text.substr(i + 1, j - i - 1);
        }
    }
    return std::nullopt;
}

// "at HH:MM" in the text overrides the report time-of-day (same day).
std::optional<Minutes> find_clock_time(const std::string& text_lower, Minutes report_time) {
    size_t pos = 0;
    while ((pos = text_lower.find("at ", pos)) != std::string::npos) {
        const size_t t = pos + 3;
        if (t + 4 < text_lower.size() + 1 && t + 4 <= text_lower.size() &&
            std::isdigit(static_cast<unsigned char>(text_lower[t]))) {
            size_t colon = t + 1;
            if (colon < text_lower.size() && std::isdigit(static_cast<unsigned char>(text_lower[colon]))) {
                ++colon;
            }
            if (colon + 2 < text_lower.size() + 1 && colon + 2 <= text_lower.size() &&
                text_lower[colon] == ':' &&
                std::isdigit(static_cast<unsigned char>(text_lower[colon + 1])) &&
                colon + 2 <= text_lower.size() &&
                std::isdigit(static_cast<unsigned char>(text_lower[colon + 2]))) {
                const int h = std::stoi(text_lower.substr(t, colon - t));
                const int m = std::stoi(text_lower.substr(colon + 1, 2));
                if (h >= 0 && h <= 23 && m >= 0 && m <= 59) {
                    const Minutes midnight = report_time - minute_of_day(report_time);
                    return midnight + h * 60 + m;
                }
            }
        }
        pos += 3;
    }
    return std::nullopt;
}

template <typename T>
void merge_max(std::optional<T>& dst, const std::optional<T>& src) {
    if (src && (!dst || *src > *dst)) dst = src;
}

}  // namespace

Rubric Rubric::builtin() {
    Rubric r;
    r.version = "1";
    // Priority order matters: phrase-level keywords come before the generic
    // single words that they contain.
    r.type_keywords = {
        {"multi-vehicle", EventType::Accident},
        {"accident", EventType::Accident},
        {"crash", EventType::Accident},
        {"collision", EventType::Accident},
        {"fender-bender", EventType::Accident},
        {"pile-up", EventType::Accident},
        {"road closure", EventType::RoadClosure},
        {"road closed", EventType::RoadClosure},
        {"full closure", EventType::RoadClosure},
        {"closed in both directions", EventType::RoadClosure},
        {"roadwork", EventType::Construction},
        {"road work", EventType::Construction},
        {"construction", EventType::Construction},
        {"maintenance", EventType::Construction},
        {"repaving", EventType::Construction},
        {"resurfacing", EventType::Construction},
        {"traffic control", EventType::TrafficControl},
        {"checkpoint", EventType::TrafficControl},
        {"police control", EventType::TrafficControl},
        {"signal outage", EventType::TrafficControl},
        {"escort", EventType::TrafficControl},
        {"hazard", EventType::Hazard},
        {"debris", EventType::Hazard},
        {"fog", EventType::Hazard},
        {"ice", EventType::Hazard},
        {"icy", EventType::Hazard},
        {"spill", EventType::Hazard},
        {"flood", EventType::Hazard},
        {"flooding", EventType::Hazard},
    };
    auto rule = [](std::string kw) {
        ScoreRule s;
        s.keyword = std::move(kw);
        return s;
    };
    auto sev = [&](std::string kw, int v) {
        ScoreRule s = rule(std::move(kw));
        s.severity = v;
        return s;
    };
    ScoreRule minor = rule("minor");
    minor.severity = 1;
    minor.danger = 1;
    ScoreRule fender = rule("fender-bender");
    fender.severity = 1;
    ScoreRule shoulder = rule("shoulder");
    shoulder.capacity_reduction = 0.1;
    shoulder.impact_scope = 1;
    ScoreRule lane_closed = rule("lane closed");
    lane_closed.capacity_reduction = 0.5;
    lane_closed.impact_scope = 3;
    ScoreRule lanes_closed = rule("lanes closed");
    lanes_closed.capacity_reduction = 0.7;
    lanes_closed.impact_scope = 4;
    ScoreRule all_lanes = rule("all lanes");
    all_lanes.capacity_reduction = 1.0;
    all_lanes.impact_scope = 5;
    ScoreRule multi = rule("multi-vehicle");
    multi.severity = 4;
    multi.danger = 4;
    ScoreRule major = rule("major");
    major.severity = 4;
    major.danger = 4;
    ScoreRule severe = rule("severe");
    severe.severity = 5;
    severe.danger = 4;
    ScoreRule fatal = rule("fatal");
    fatal.severity = 5;
    fatal.danger = 5;
    ScoreRule injuries = rule("injuries");
    injuries.severity = 4;
    injuries.danger = 4;
    ScoreRule overnight = rule("overnight");
    overnight.duration_score = 5;
    ScoreRule long_term = rule("long-term");
    long_term.duration_score = 5;
    ScoreRule hours = rule("several hours");
    hours.duration_score = 4;
    ScoreRule brief = rule("brief");
    brief.duration_score = 1;
    ScoreRule cleared = rule("quickly cleared");
    cleared.duration_score = 1;
    ScoreRule citywide = rule("citywide");
    citywide.impact_scope = 5;
    ScoreRule both_dir = rule("both directions");
    both_dir.impact_scope = 4;
    both_dir.capacity_reduction = 0.8;
    r.score_rules = {minor, fender, shoulder, lane_closed, lanes_closed, all_lanes,
                     multi, major, severe, fatal, injuries, overnight, long_term,
                     hours, brief, cleared, citywide, both_dir,
                     sev("moderate", 3), sev("heavy", 4)};
    return r;
}

namespace {

json rule_to_json(const Rubric::ScoreRule& s) {
    json j;
    j["keyword"] = s.keyword;
    if (s.severity) j["severity"] = *s.severity;
    if (s.danger) j["danger"] = *s.danger;
    if (s.duration_score) j["duration_score"] = *s.duration_score;
    if (s.impact_scope) j["impact_scope"] = *s.impact_scope;
    if (s.capacity_reduction) j["capacity_reduction"] = *s.capacity_reduction;
    return j;
}

Rubric::ScoreRule rule_from_json(const json& j) {
    Rubric::ScoreRule s;
    s.keyword = j.at("keyword").get<std::string>();
    if (j.contains("severity")) s.severity = j["severity"].get<int>();
    if (j.contains("danger")) s.danger = j["danger"].get<int>();
    if (j.contains("duration_score")) s.duration_score = j["duration_score"].get<int>();
    if (j.contains("impact_scope")) s.impact_scope = j["impact_scope"].get<int>();
    if (j.contains("capacity_reduction")) s.capacity_reduction = j["capacity_reduction"].get<double>();
    return s;
}

}  // namespace

Rubric Rubric::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IoError", "cannot open rubric file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail("ParseError", "rubric " + path + ": " + e.what());
    }
    Rubric r;
    r.version = j.at("version").get<std::string>();
    for (const auto& tk : j.at("type_keywords")) {
        r.type_keywords.emplace_back(tk.at("keyword").get<std::string>(),
                                     event_type_from_string(tk.at("type").get<std::string>()));
    }
    for (const auto& sr : j.at("score_rules")) r.score_rules.push_back(rule_from_json(sr));
    if (j.contains("duration_minutes_by_score")) {
        auto v = j["duration_minutes_by_score"].get<std::vector<double>>();
        if (v.size() != 5) fail("ParseError", "duration_minutes_by_score must have 5 entries");
        std::copy(v.begin(), v.end(), r.duration_minutes_by_score.begin());
    }
    return r;
}

void Rubric::save(const std::string& path) const {
    json j;
    j["version"] = version;
    j["type_keywords"] = json::array();
    for (const auto& [kw, t] : type_keywords) {
        j["type_keywords"].push_back({{"keyword", kw}, {"type", to_string(t)}});
    }
    j["score_rules"] = json::array();
    for (const auto& s : score_rules) j["score_rules"].push_back(rule_to_json(s));
    j["duration_minutes_by_score"] = duration_minutes_by_score;
    std::ofstream out(path);
    if (!out) fail("IoError", "cannot write rubric file " + path);
    out << j.dump(2) << "\n";
}

PartialEvent structurize(const RawEventText& raw, const Rubric& rubric,
                         const LocationTable& locations) {
    if (raw.text.empty()) fail("UnclassifiableEvent", "event " + raw.event_id + ": empty text");
    const std::string text = lower(raw.text);

    PartialEvent out;
    bool typed = false;
    for (const auto& [keyword, type] : rubric.type_keywords) {
        if (contains_keyword(text, keyword)) {
            out.event_type = type;
            typed = true;
            break;
        }
    }
    if (!typed) {
        fail("UnclassifiableEvent",
             "event " + raw.event_id + ": no event-type keyword in '" + raw.text + "'");
    }

    if (auto seg = find_segment_token(raw.text)) {
        out.segment_id = *seg;
    } else {
        for (const auto& [name, id] : locations) {
            if (contains_keyword(text, lower(name))) {
                out.segment_id = id;
                break;
            }
        }
    }
    if (out.segment_id.empty()) {
        fail("MissingLocation", "event " + raw.event_id + ": no location token");
    }

    out.onset = find_clock_time(text, raw.report_time).value_or(raw.report_time);
    return out;
}

EventRecord quantify(const PartialEvent& partial, const RawEventText& raw,
                     const Rubric& rubric) {
    const std::string text = lower(raw.text);
    std::optional<int> severity, danger, duration_score, impact_scope;
    std::optional<double> capacity;
    for (const auto& rule : rubric.score_rules) {
        if (!contains_keyword(text, rule.keyword)) continue;
        merge_max(severity, rule.severity);
        merge_max(danger, rule.danger);
        merge_max(duration_score, rule.duration_score);
        merge_max(impact_scope, rule.impact_scope);
        merge_max(capacity, rule.capacity_reduction);
    }
    EventRecord rec;
    rec.event_id = raw.event_id;
    rec.event_type = partial.event_type;
    rec.onset = partial.onset;
    rec.segment_id = partial.segment_id;
    rec.severity = severity.value_or(2);
    rec.danger = danger.value_or(2);
    rec.duration_score = duration_score.value_or(2);
    rec.impact_scope = impact_scope.value_or(2);
    rec.capacity_reduction = capacity.value_or(0.2);
    rec.expected_duration_min =
        rubric.duration_minutes_by_score[static_cast<size_t>(rec.duration_score - 1)];
    rec.validate();
    return rec;
}

std::string to_json_line(const EventRecord& r) {
    json j;
    j["event_id"] = r.event_id;
    j["event_type"] = to_string(r.event_type);
    j["onset"] = format_iso_minutes(r.onset);
    j["segment_id"] = r.segment_id;
    j["severity"] = r.severity;
    j["danger"] = r.danger;
    j["duration_score"] = r.duration_score;
    j["impact_scope"] = r.impact_scope;
    j["capacity_reduction"] = r.capacity_reduction;
    j["expected_duration_min"] = r.expected_duration_min;
    return j.dump();
}

EventRecord event_record_from_json(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        fail("ParseError", std::string("bad event record: ") + e.what());
    }
    EventRecord r;
    r.event_id = j.at("event_id").get<std::string>();
    r.event_type = event_type_from_string(j.at("event_type").get<std::string>());
    r.onset = parse_iso_minutes(j.at("onset").get<std::string>());
    r.segment_id = j.at("segment_id").get<std::string>();
    r.severity = j.at("severity").get<int>();
    r.danger = j.at("danger").get<int>();
    r.duration_score = j.at("duration_score").get<int>();
    r.impact_scope = j.at("impact_scope").get<int>();
    r.capacity_reduction = j.at("capacity_reduction").get<double>();
    r.expected_duration_min = j.at("expected_duration_min").get<double>();
    r.validate();
    return r;
}

std::vector<RawEventText> read_raw_events_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IoError", "cannot open " + path);
    std::vector<RawEventText> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            fail("ParseError", path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        RawEventText r;
        r.event_id = j.at("event_id").get<std::string>();
        r.text = j.at("text").get<std::string>();
        r.report_time = parse_iso_minutes(j.at("report_time").get<std::string>());
        r.source = j.value("source", "");
        if (r.text.empty()) {
            fail("ParseError", path + ":" + std::to_string(line_no) + ": empty text");
        }
        out.push_back(std::move(r));
    }
    return out;
}

void write_raw_events_jsonl(const std::string& path, const std::vector<RawEventText>& raws) {
    std::ofstream out(path);
    if (!out) fail("IoError", "cannot write " + path);
    for (const auto& r : raws) {
        json j;
        j["event_id"] = r.event_id;
        j["text"] = r.text;
        j["report_time"] = format_iso_minutes(r.report_time);
        j["source"] = r.source;
        out << j.dump() << "\n";
    }
}

std::vector<EventRecord> read_event_records_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IoError", "cannot open " + path);
    std::vector<EventRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) out.push_back(event_record_from_json(line));
    }
    return out;
}

void write_event_records_jsonl(const std::string& path,
                               const std::vector<EventRecord>& records) {
    std::ofstream out(path);
    if (!out) fail("IoError", "cannot write " + path);
    for (const auto& r : records) out << to_json_line(r) << "\n";
}

}  // namespace causalcast
