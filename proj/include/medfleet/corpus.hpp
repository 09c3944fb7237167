// SPDX-License-Identifier: Apache-2.0
//
// Canonical data types for papers, findings, QA pairs, and dataset statistics,
// plus the line-delimited persistence shared by every other module.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "medfleet/detail/strings.hpp"

namespace medfleet {

using ordered_json = nlohmann::ordered_json;

inline constexpr int kDefaultMinYear = 2010;

// ---------------------------------------------------------------------------
// Sub-specialties

enum class SubSpecialty : std::uint8_t { ALL, CAR, MET, GAS, HEM, INF, ONC, RES, RHE, URO, MED };

inline constexpr std::array<SubSpecialty, 11> kAllSpecialties = {
    SubSpecialty::ALL, SubSpecialty::CAR, SubSpecialty::MET, SubSpecialty::GAS,
    SubSpecialty::HEM, SubSpecialty::INF, SubSpecialty::ONC, SubSpecialty::RES,
    SubSpecialty::RHE, SubSpecialty::URO, SubSpecialty::MED,
};

inline constexpr std::string_view to_code(SubSpecialty s) {
    switch (s) {
        case SubSpecialty::ALL: return "ALL";
        case SubSpecialty::CAR: return "CAR";
        case SubSpecialty::MET: return "MET";
        case SubSpecialty::GAS: return "GAS";
        case SubSpecialty::HEM: return "HEM";
        case SubSpecialty::INF: return "INF";
        case SubSpecialty::ONC: return "ONC";
        case SubSpecialty::RES: return "RES";
        case SubSpecialty::RHE: return "RHE";
        case SubSpecialty::URO: return "URO";
        case SubSpecialty::MED: return "MED";
    }
    return "???";
}

inline constexpr std::string_view specialty_name(SubSpecialty s) {
    switch (s) {
        case SubSpecialty::ALL: return "Allergy";
        case SubSpecialty::CAR: return "Cardiac Cardiovascular Systems";
        case SubSpecialty::MET: return "Endocrinology Metabolism";
        case SubSpecialty::GAS: return "Gastroenterology";
        case SubSpecialty::HEM: return "Hematology";
        case SubSpecialty::INF: return "Infectious Diseases";
        case SubSpecialty::ONC: return "Oncology";
        case SubSpecialty::RES: return "Respiratory System";
        case SubSpecialty::RHE: return "Rheumatology";
        case SubSpecialty::URO: return "Urology Nephrology";
        case SubSpecialty::MED: return "General Internal Medicine";
    }
    return "???";
}

inline std::optional<SubSpecialty> parse_specialty(std::string_view code) {
    for (auto s : kAllSpecialties)
        if (to_code(s) == code) return s;
    return std::nullopt;
}

class UnknownSpecialtyError : public std::runtime_error {
public:
    explicit UnknownSpecialtyError(std::string code)
        : std::runtime_error("unknown specialty code: " + code), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

// ---------------------------------------------------------------------------
// Records

struct PaperRecord {
    std::string pmid;
    std::string journal;  // exact journal title as published
    std::string title;
    std::string abstract;
    int pub_year = 0;
    std::optional<SubSpecialty> specialty;  // set once routed

    bool operator==(const PaperRecord&) const = default;
};

struct Finding {
    std::string text;  // exactly one sentence, list number stripped
    std::string source_pmid;
    int index = 0;  // 1-based ordinal within its abstract

    bool operator==(const Finding&) const = default;
};

struct QAPair {
    std::string question;
    std::string answer;  // a filtered Finding's text
    SubSpecialty specialty = SubSpecialty::MED;
    std::string source_pmid;

    bool operator==(const QAPair&) const = default;
};

struct StatsRow {
    std::optional<SubSpecialty> specialty;  // nullopt marks the totals row
    long long journals = 0;
    long long papers = 0;
    double papers_per_journal = 0.0;
    long long tokens = 0;
    long long qa_pairs = 0;
    std::optional<long long> pt_steps;   // pass-through metadata
    std::optional<long long> sft_steps;  // pass-through metadata
};

// papers/journals reported to 2 decimals. The published table truncates the
// third decimal rather than rounding it, so this is exact integer arithmetic.
inline double papers_per_journal(long long papers, long long journals) {
    if (journals <= 0) return 0.0;
    return static_cast<double>(papers * 100 / journals) / 100.0;
}

inline StatsRow totals_row(const std::vector<StatsRow>& rows) {
    StatsRow total;
    for (const auto& r : rows) {
        if (!r.specialty) continue;  // never double-count an existing totals row
        total.journals += r.journals;
        total.papers += r.papers;
        total.tokens += r.tokens;
        total.qa_pairs += r.qa_pairs;
        if (r.pt_steps) total.pt_steps = total.pt_steps.value_or(0) + *r.pt_steps;
        if (r.sft_steps) total.sft_steps = total.sft_steps.value_or(0) + *r.sft_steps;
    }
    total.papers_per_journal = papers_per_journal(total.papers, total.journals);
    return total;
}

// ---------------------------------------------------------------------------
// Validation

enum class RejectReason { EmptyAbstract, EmptyJournal, EmptyId, TooOld };

struct Rejection {
    RejectReason reason;
    int year = 0;  // meaningful for TooOld

    std::string describe() const {
        switch (reason) {
            case RejectReason::EmptyAbstract: return "EmptyAbstract";
            case RejectReason::EmptyJournal: return "EmptyJournal";
            case RejectReason::EmptyId: return "EmptyId";
            case RejectReason::TooOld: return "TooOld(" + std::to_string(year) + ")";
        }
        return "?";
    }
};

// nullopt means the record is admissible.
inline std::optional<Rejection> validate_record(const PaperRecord& r,
                                                int min_year = kDefaultMinYear) {
    if (detail::trim(r.abstract).empty()) return Rejection{RejectReason::EmptyAbstract};
    if (detail::trim(r.journal).empty()) return Rejection{RejectReason::EmptyJournal};
    if (detail::trim(r.pmid).empty()) return Rejection{RejectReason::EmptyId};
    if (r.pub_year < min_year) return Rejection{RejectReason::TooOld, r.pub_year};
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Errors

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SchemaError : public std::runtime_error {
public:
    SchemaError(std::size_t line_no, std::string field, const std::string& what)
        : std::runtime_error("line " + std::to_string(line_no) +
                             (field.empty() ? "" : ", field '" + field + "'") + ": " + what),
          line_no_(line_no),
          field_(std::move(field)) {}

    std::size_t line_no() const { return line_no_; }
    const std::string& field() const { return field_; }

private:
    std::size_t line_no_;
    std::string field_;
};

// ---------------------------------------------------------------------------
// Line-delimited persistence

namespace detail_corpus {

inline std::string require_string(const ordered_json& j, const char* key, std::size_t line_no) {
    auto it = j.find(key);
    if (it == j.end()) throw SchemaError(line_no, key, "missing field");
    if (!it->is_string()) throw SchemaError(line_no, key, "expected a string");
    return it->get<std::string>();
}

inline long long require_int(const ordered_json& j, const char* key, std::size_t line_no) {
    auto it = j.find(key);
    if (it == j.end()) throw SchemaError(line_no, key, "missing field");
    if (!it->is_number_integer() && !it->is_number_unsigned())
        throw SchemaError(line_no, key, "expected an integer");
    return it->get<long long>();
}

inline void reject_unknown_keys(const ordered_json& j, std::initializer_list<std::string_view> known,
                                std::size_t line_no) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (auto k : known)
            if (it.key() == k) ok = true;
        if (!ok) throw SchemaError(line_no, it.key(), "unknown field");
    }
}

inline ordered_json parse_line(std::string_view line, std::size_t line_no) {
    ordered_json j = ordered_json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object())
        throw SchemaError(line_no, "", "not a valid record object");
    return j;
}

}  // namespace detail_corpus

inline ordered_json to_json(const PaperRecord& r) {
    ordered_json j;
    j["pmid"] = r.pmid;
    j["journal"] = r.journal;
    j["title"] = r.title;
    j["abstract"] = r.abstract;
    j["pub_year"] = r.pub_year;
    if (r.specialty) j["specialty"] = std::string(to_code(*r.specialty));
    return j;
}

inline PaperRecord record_from_json(const ordered_json& j, std::size_t line_no) {
    detail_corpus::reject_unknown_keys(
        j, {"pmid", "journal", "title", "abstract", "pub_year", "specialty"}, line_no);
    PaperRecord r;
    r.pmid = detail_corpus::require_string(j, "pmid", line_no);
    r.journal = detail_corpus::require_string(j, "journal", line_no);
    r.title = detail_corpus::require_string(j, "title", line_no);
    r.abstract = detail_corpus::require_string(j, "abstract", line_no);
    long long year = detail_corpus::require_int(j, "pub_year", line_no);
    if (year < 0 || year > 9999) throw SchemaError(line_no, "pub_year", "year out of range");
    r.pub_year = static_cast<int>(year);
    if (auto it = j.find("specialty"); it != j.end()) {
        if (!it->is_string()) throw SchemaError(line_no, "specialty", "expected a string");
        auto s = parse_specialty(it->get<std::string>());
        if (!s) throw SchemaError(line_no, "specialty", "unknown specialty code");
        r.specialty = *s;
    }
    return r;
}

inline ordered_json to_json(const QAPair& q) {
    ordered_json j;
    j["question"] = q.question;
    j["answer"] = q.answer;
    j["specialty"] = std::string(to_code(q.specialty));
    j["source_pmid"] = q.source_pmid;
    return j;
}

inline QAPair qa_from_json(const ordered_json& j, std::size_t line_no) {
    detail_corpus::reject_unknown_keys(j, {"question", "answer", "specialty", "source_pmid"},
                                       line_no);
    QAPair q;
    q.question = detail_corpus::require_string(j, "question", line_no);
    q.answer = detail_corpus::require_string(j, "answer", line_no);
    auto s = parse_specialty(detail_corpus::require_string(j, "specialty", line_no));
    if (!s) throw SchemaError(line_no, "specialty", "unknown specialty code");
    q.specialty = *s;
    q.source_pmid = detail_corpus::require_string(j, "source_pmid", line_no);
    return q;
}

inline std::size_t write_corpus(const std::vector<PaperRecord>& records, std::ostream& out) {
    for (const auto& r : records) out << to_json(r).dump() << '\n';
    if (!out) throw IoError("corpus write failed");
    return records.size();
}

inline std::size_t write_corpus(const std::vector<PaperRecord>& records,
                                const std::filesystem::path& dest) {
    std::ofstream out(dest, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + dest.string());
    return write_corpus(records, out);
}

inline std::vector<PaperRecord> read_corpus(std::istream& in) {
    std::vector<PaperRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        records.push_back(record_from_json(detail_corpus::parse_line(line, line_no), line_no));
    }
    return records;
}

inline std::vector<PaperRecord> read_corpus(const std::filesystem::path& source) {
    std::ifstream in(source, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + source.string());
    return read_corpus(in);
}

// Lenient read: malformed lines are collected, well-formed ones recovered.
struct LenientRead {
    std::vector<PaperRecord> records;
    std::vector<SchemaError> errors;
};

inline LenientRead read_corpus_lenient(std::istream& in) {
    LenientRead out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        try {
            out.records.push_back(
                record_from_json(detail_corpus::parse_line(line, line_no), line_no));
        } catch (const SchemaError& e) {
            out.errors.push_back(e);
        }
    }
    return out;
}

inline LenientRead read_corpus_lenient(const std::filesystem::path& source) {
    std::ifstream in(source, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + source.string());
    return read_corpus_lenient(in);
}

inline std::size_t write_qa_pairs(const std::vector<QAPair>& pairs, std::ostream& out) {
    for (const auto& q : pairs) out << to_json(q).dump() << '\n';
    if (!out) throw IoError("QA dataset write failed");
    return pairs.size();
}

inline std::size_t write_qa_pairs(const std::vector<QAPair>& pairs,
                                  const std::filesystem::path& dest) {
    std::ofstream out(dest, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + dest.string());
    return write_qa_pairs(pairs, out);
}

inline std::vector<QAPair> read_qa_pairs(std::istream& in) {
    std::vector<QAPair> pairs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        pairs.push_back(qa_from_json(detail_corpus::parse_line(line, line_no), line_no));
    }
    return pairs;
}

inline std::vector<QAPair> read_qa_pairs(const std::filesystem::path& source) {
    std::ifstream in(source, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + source.string());
    return read_qa_pairs(in);
}

// ---------------------------------------------------------------------------
// Stats export

inline constexpr std::string_view kStatsCsvHeader =
    "specialty,journals,papers,papers_per_journal,tokens,qa_pairs,pt_steps,sft_steps";

inline void write_stats_csv(const std::vector<StatsRow>& rows, std::ostream& out) {
    out << kStatsCsvHeader << '\n';
    for (const auto& r : rows) {
        out << (r.specialty ? to_code(*r.specialty) : std::string_view("Total")) << ','
            << r.journals << ',' << r.papers << ','
            << detail::format_fixed(r.papers_per_journal, 2) << ',' << r.tokens << ','
            << r.qa_pairs << ',';
        if (r.pt_steps) out << *r.pt_steps;
        out << ',';
        if (r.sft_steps) out << *r.sft_steps;
        out << '\n';
    }
    if (!out) throw IoError("stats write failed");
}

inline void write_stats_csv(const std::vector<StatsRow>& rows,
                            const std::filesystem::path& dest) {
    std::ofstream out(dest, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + dest.string());
    write_stats_csv(rows, out);
}

}  // namespace medfleet
