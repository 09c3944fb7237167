// SPDX-License-Identifier: Apache-2.0
//
// Journal→sub-specialty catalog, paper routing, token counting, and the
// dataset statistics table.
#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "medfleet/corpus.hpp"
#include "medfleet/detail/csv.hpp"
#include "medfleet/detail/strings.hpp"

namespace medfleet {

// ---------------------------------------------------------------------------
// Errors

class DuplicateJournalError : public std::runtime_error {
public:
    DuplicateJournalError(std::string journal, SubSpecialty first, SubSpecialty second)
        : std::runtime_error("journal '" + journal + "' listed under both " +
                             std::string(to_code(first)) + " and " + std::string(to_code(second))),
          journal_(std::move(journal)),
          first_(first),
          second_(second) {}
    const std::string& journal() const { return journal_; }
    SubSpecialty first() const { return first_; }
    SubSpecialty second() const { return second_; }

private:
    std::string journal_;
    SubSpecialty first_;
    SubSpecialty second_;
};

class UnroutedJournalError : public std::runtime_error {
public:
    explicit UnroutedJournalError(std::string journal)
        : std::runtime_error("journal not in catalog: '" + journal + "'"),
          journal_(std::move(journal)) {}
    const std::string& journal() const { return journal_; }

private:
    std::string journal_;
};

// ---------------------------------------------------------------------------
// Journal catalog

// Maps normalized journal titles to sub-specialties. Stands in for the JCR
// top-10% lists, which are licensed data and not shipped.
class JournalCatalog {
public:
    // Throws DuplicateJournalError when the same (normalized) title is
    // assigned to two different specialties; re-adding the same pair is a no-op.
    void add(std::string_view journal_title, SubSpecialty specialty) {
        auto key = detail::normalize_key(journal_title);
        auto [it, inserted] = entries_.emplace(key, specialty);
        if (!inserted) {
            if (it->second != specialty)
                throw DuplicateJournalError(std::string(journal_title), it->second, specialty);
            return;
        }
        ++counts_[static_cast<std::size_t>(specialty)];
    }

    std::optional<SubSpecialty> find(std::string_view journal_title) const {
        auto it = entries_.find(detail::normalize_key(journal_title));
        if (it == entries_.end()) return std::nullopt;
        return it->second;
    }

    SubSpecialty route(std::string_view journal_title) const {
        if (auto s = find(journal_title)) return *s;
        throw UnroutedJournalError(std::string(detail::trim(journal_title)));
    }

    std::size_t size() const { return entries_.size(); }

    long long journal_count(SubSpecialty s) const {
        return counts_[static_cast<std::size_t>(s)];
    }

    const std::map<std::string, SubSpecialty>& entries() const { return entries_; }

private:
    std::map<std::string, SubSpecialty> entries_;  // normalized title → specialty
    std::array<long long, kAllSpecialties.size()> counts_{};
};

// CSV rows `journal_name,specialty_code`; a header row with those exact names
// is tolerated and skipped.
inline JournalCatalog load_catalog(std::istream& in) {
    JournalCatalog catalog;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        auto fields = detail::parse_csv_row(line);
        if (fields.size() != 2)
            throw SchemaError(line_no, "", "expected 2 columns, got " +
                                               std::to_string(fields.size()));
        auto name = detail::trim(fields[0]);
        auto code = detail::trim(fields[1]);
        if (line_no == 1 && name == "journal_name" && code == "specialty_code") continue;
        if (name.empty()) throw SchemaError(line_no, "journal_name", "empty journal name");
        auto specialty = parse_specialty(code);
        if (!specialty) throw UnknownSpecialtyError(std::string(code));
        catalog.add(name, *specialty);
    }
    return catalog;
}

inline JournalCatalog load_catalog(const std::filesystem::path& source) {
    std::ifstream in(source, std::ios::binary);
    if (!in) throw IoError("cannot open catalog: " + source.string());
    return load_catalog(in);
}

inline SubSpecialty route_paper(const PaperRecord& record, const JournalCatalog& catalog) {
    return catalog.route(record.journal);
}

// ---------------------------------------------------------------------------
// Tokenizer

namespace detail_partition {

inline bool is_unicode_space(char32_t cp) {
    switch (cp) {
        case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
        case 0x85: case 0xA0: case 0x1680:
        case 0x2000: case 0x2001: case 0x2002: case 0x2003: case 0x2004:
        case 0x2005: case 0x2006: case 0x2007: case 0x2008: case 0x2009:
        case 0x200A: case 0x2028: case 0x2029: case 0x202F: case 0x205F:
        case 0x3000:
            return true;
        default:
            return false;
    }
}

// Decodes one UTF-8 codepoint at i, advancing i. Malformed bytes decode as
// U+FFFD one byte at a time, so counting always terminates.
inline char32_t decode_utf8(std::string_view s, std::size_t& i) {
    unsigned char b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    std::size_t len = b0 < 0xC0 ? 0 : b0 < 0xE0 ? 2 : b0 < 0xF0 ? 3 : b0 < 0xF8 ? 4 : 0;
    if (len == 0 || i + len > s.size()) {
        ++i;
        return 0xFFFD;
    }
    char32_t cp = b0 & (0xFF >> (len + 1));
    for (std::size_t k = 1; k < len; ++k) {
        unsigned char b = static_cast<unsigned char>(s[i + k]);
        if ((b & 0xC0) != 0x80) {
            ++i;
            return 0xFFFD;
        }
        cp = (cp << 6) | (b & 0x3F);
    }
    i += len;
    return cp;
}

}  // namespace detail_partition

// A named, deterministic text→token-count function.
struct Tokenizer {
    std::string name;
    std::function<long long(std::string_view)> count;
};

// Default: token = maximal run of non-whitespace codepoints (Unicode spaces).
inline Tokenizer whitespace_tokenizer() {
    return Tokenizer{"whitespace", [](std::string_view text) {
                         long long tokens = 0;
                         bool in_token = false;
                         std::size_t i = 0;
                         while (i < text.size()) {
                             char32_t cp = detail_partition::decode_utf8(text, i);
                             if (detail_partition::is_unicode_space(cp)) {
                                 in_token = false;
                             } else if (!in_token) {
                                 in_token = true;
                                 ++tokens;
                             }
                         }
                         return tokens;
                     }};
}

class UnknownTokenizerError : public std::runtime_error {
public:
    explicit UnknownTokenizerError(const std::string& name)
        : std::runtime_error("unknown tokenizer: " + name) {}
};

inline Tokenizer make_tokenizer(const std::string& name) {
    if (name == "whitespace") return whitespace_tokenizer();
    throw UnknownTokenizerError(name);
}

inline long long count_tokens(std::string_view text, const Tokenizer& tokenizer) {
    return tokenizer.count(text);
}

// ---------------------------------------------------------------------------
// Statistics

// Builds the 11 per-specialty rows plus a totals row. journals counts
// distinct (normalized) journal titles observed in the corpus, not catalog
// size. Unrouted records surface as UnroutedJournalError.
inline std::vector<StatsRow> compute_stats(const std::vector<PaperRecord>& corpus,
                                           const JournalCatalog& catalog,
                                           const Tokenizer& tokenizer,
                                           const std::vector<QAPair>* qa_dataset = nullptr) {
    constexpr auto n = kAllSpecialties.size();
    std::array<std::set<std::string>, n> journals;
    std::array<long long, n> papers{};
    std::array<long long, n> tokens{};
    std::array<long long, n> qa_counts{};

    for (const auto& record : corpus) {
        SubSpecialty s = record.specialty ? *record.specialty : route_paper(record, catalog);
        auto idx = static_cast<std::size_t>(s);
        journals[idx].insert(detail::normalize_key(record.journal));
        ++papers[idx];
        tokens[idx] += tokenizer.count(record.abstract);
    }
    if (qa_dataset)
        for (const auto& pair : *qa_dataset) ++qa_counts[static_cast<std::size_t>(pair.specialty)];

    std::vector<StatsRow> rows;
    rows.reserve(n + 1);
    for (auto s : kAllSpecialties) {
        auto idx = static_cast<std::size_t>(s);
        StatsRow row;
        row.specialty = s;
        row.journals = static_cast<long long>(journals[idx].size());
        row.papers = papers[idx];
        row.papers_per_journal = papers_per_journal(row.papers, row.journals);
        row.tokens = tokens[idx];
        row.qa_pairs = qa_counts[idx];
        rows.push_back(row);
    }
    rows.push_back(totals_row(rows));
    return rows;
}

// Routes every record, stamps its specialty, and writes one
// `<CODE>.jsonl` per non-empty specialty under out_dir. Returns per-specialty
// record counts.
inline std::map<SubSpecialty, std::size_t> write_partitioned_corpus(
    const std::vector<PaperRecord>& corpus, const JournalCatalog& catalog,
    const std::filesystem::path& out_dir) {
    std::map<SubSpecialty, std::vector<PaperRecord>> buckets;
    for (const auto& record : corpus) {
        SubSpecialty s = record.specialty ? *record.specialty : route_paper(record, catalog);
        auto copy = record;
        copy.specialty = s;
        buckets[s].push_back(std::move(copy));
    }
    std::filesystem::create_directories(out_dir);
    std::map<SubSpecialty, std::size_t> counts;
    for (const auto& [specialty, records] : buckets) {
        write_corpus(records, out_dir / (std::string(to_code(specialty)) + ".jsonl"));
        counts[specialty] = records.size();
    }
    return counts;
}

}  // namespace medfleet
