// SPDX-License-Identifier: Apache-2.0
//
// Two-stage QA distillation: render the finding-extraction and
// question-generation prompts, call a pluggable completion client, parse
// numbered findings, apply the keyword filter, and account costs.
#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "medfleet/corpus.hpp"
#include "medfleet/detail/rng.hpp"
#include "medfleet/detail/sha256.hpp"
#include "medfleet/detail/strings.hpp"

namespace medfleet {

// ---------------------------------------------------------------------------
// Prompts
//
// The user templates below are fixed text; only the bracketed placeholder is
// substituted. Tests hold golden copies and compare byte-for-byte.

inline constexpr std::string_view kFindingSystemPrompt = "You are a medical AI assistant.";

inline constexpr std::string_view kFindingUserTemplate =
    "Read the abstract of the following paper carefully.Identify key findings from medical "
    "perspectives step-by-step.\n"
    "Here are requirements:\n"
    "1. Number your findings.\n"
    "2. Start the sentence with a number.\n"
    "3. The finding must not include pronouns.\n"
    "4. Each finding must include at least two medical entities.\n"
    "5. Each finding should be capable of being explained independently, without reference to "
    "other findings.\n"
    "6. Refer only to the abstract of the given paper and do not utilize your existing "
    "knowledge.\n"
    "\n"
    "{abstract}";

inline constexpr std::string_view kQuestionSystemPrompt = "You are a medical AI assistant.";

inline constexpr std::string_view kQuestionUserTemplate =
    "You are a helpful assistant.\n"
    "The following are key findings extracted from the abstract of a paper in PubMed.\n"
    "[Finding]: {findings}.\n"
    "Please write the most appropriate question for the given answer.\n"
    "Here are requirements:\n"
    "1. If the findings are not specific to the biomedical field, respond with 'None'.\n"
    "2. The question must be a single sentence.";

struct PromptMessages {
    std::string system;
    std::string user;

    bool operator==(const PromptMessages&) const = default;
};

class EmptyAbstractError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline PromptMessages render_finding_prompt(std::string_view abstract) {
    if (detail::trim(abstract).empty()) throw EmptyAbstractError("abstract is empty");
    PromptMessages p;
    p.system = std::string(kFindingSystemPrompt);
    p.user = std::string(kFindingUserTemplate);
    detail::replace_first(p.user, "{abstract}", abstract);
    return p;
}

inline PromptMessages render_question_prompt(const Finding& finding) {
    PromptMessages p;
    p.system = std::string(kQuestionSystemPrompt);
    p.user = std::string(kQuestionUserTemplate);
    detail::replace_first(p.user, "{findings}", finding.text);
    return p;
}

// ---------------------------------------------------------------------------
// Sentence segmentation
//
// Deterministic rule: a sentence ends at `. ! ?` followed by whitespace or
// end of text, except when the '.' closes a stop-listed abbreviation.

namespace detail_distill {

inline bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

inline bool ends_abbreviation(std::string_view text, std::size_t dot) {
    static constexpr std::string_view kAbbrev[] = {"vs.", "e.g.", "i.e.", "fig.", "al."};
    std::size_t begin = dot;
    while (begin > 0 && !std::isspace(static_cast<unsigned char>(text[begin - 1]))) --begin;
    auto word = detail::ascii_lower(text.substr(begin, dot - begin + 1));
    for (auto a : kAbbrev)
        if (word == a) return true;
    return false;
}

inline std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (!is_terminal(text[i])) continue;
        bool at_end = i + 1 == text.size();
        if (!at_end && !std::isspace(static_cast<unsigned char>(text[i + 1]))) continue;
        if (text[i] == '.' && ends_abbreviation(text, i)) continue;
        auto sentence = detail::trim(text.substr(start, i - start + 1));
        if (!sentence.empty()) out.emplace_back(sentence);
        start = i + 1;
    }
    auto tail = detail::trim(text.substr(start));
    if (!tail.empty()) out.emplace_back(tail);
    return out;
}

// ASCII-whitespace token count, the unit for usage accounting in the mocks.
inline long long rough_tokens(std::string_view text) {
    long long n = 0;
    bool in_token = false;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            in_token = false;
        } else if (!in_token) {
            in_token = true;
            ++n;
        }
    }
    return n;
}

}  // namespace detail_distill

// ---------------------------------------------------------------------------
// Finding parsing

class NoFindingsError : public std::runtime_error {
public:
    explicit NoFindingsError(std::string pmid)
        : std::runtime_error("no numbered findings in completion for pmid " + pmid),
          pmid_(std::move(pmid)) {}
    const std::string& pmid() const { return pmid_; }

private:
    std::string pmid_;
};

// Lines matching `^\s*<digits>[.)]\s+` become findings with the number
// stripped; anything else is ignored. Each finding is truncated to its first
// sentence. A line with no terminal punctuation is kept verbatim rather than
// silently dropped. The 1-based index counts accepted findings positionally;
// the model's own numbering is not trusted.
inline std::vector<Finding> parse_findings(std::string_view completion_text,
                                           std::string_view source_pmid) {
    std::vector<Finding> findings;
    for (auto line : detail::split_lines(completion_text)) {
        std::size_t i = 0;
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t digits = i;
        while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
        if (i == digits) continue;
        if (i >= line.size() || (line[i] != '.' && line[i] != ')')) continue;
        ++i;
        if (i >= line.size() || !std::isspace(static_cast<unsigned char>(line[i]))) continue;
        auto rest = detail::trim(line.substr(i));
        if (rest.empty()) continue;
        auto sentences = detail_distill::split_sentences(rest);
        if (sentences.empty()) continue;
        findings.push_back({std::move(sentences.front()), std::string(source_pmid),
                            static_cast<int>(findings.size()) + 1});
    }
    if (findings.empty()) throw NoFindingsError(std::string(source_pmid));
    return findings;
}

// ---------------------------------------------------------------------------
// Keyword filter

inline const std::vector<std::string>& default_filter_keywords() {
    static const std::vector<std::string> kw = {"study",    "paper",  "result",
                                                "abstract", "author", "department"};
    return kw;
}

struct FilterVerdict {
    bool kept = true;
    std::optional<std::string> reason;  // the matched keyword, present iff dropped
};

class KeywordFilter {
public:
    enum class Mode { WholeWord, Substring };

    KeywordFilter() : KeywordFilter(default_filter_keywords()) {}

    explicit KeywordFilter(std::vector<std::string> keywords, Mode mode = Mode::WholeWord)
        : mode_(mode) {
        keywords_.reserve(keywords.size());
        for (auto& k : keywords) keywords_.push_back(detail::ascii_lower(k));
    }

    FilterVerdict check(std::string_view text) const {
        if (mode_ == Mode::WholeWord) {
            auto tokens = detail::word_tokens(text);
            for (const auto& keyword : keywords_)
                for (const auto& token : tokens)
                    if (token == keyword) return {false, keyword};
        } else {
            auto lower = detail::ascii_lower(text);
            for (const auto& keyword : keywords_)
                if (lower.find(keyword) != std::string::npos) return {false, keyword};
        }
        return {true, std::nullopt};
    }

    const std::vector<std::string>& keywords() const { return keywords_; }
    Mode mode() const { return mode_; }

private:
    std::vector<std::string> keywords_;
    Mode mode_;
};

inline FilterVerdict filter_finding(const Finding& finding, const KeywordFilter& filter) {
    return filter.check(finding.text);
}

// ---------------------------------------------------------------------------
// Question parsing

enum class QuestionReject { Empty, MultiSentence, NotInterrogative };

inline std::string_view to_string(QuestionReject r) {
    switch (r) {
        case QuestionReject::Empty: return "Empty";
        case QuestionReject::MultiSentence: return "MultiSentence";
        case QuestionReject::NotInterrogative: return "NotInterrogative";
    }
    return "?";
}

struct QuestionOutcome {
    enum class Kind { Question, NotBiomedical, Rejected };
    Kind kind = Kind::Rejected;
    std::string question;  // set for Kind::Question
    QuestionReject reject = QuestionReject::Empty;
};

inline QuestionOutcome parse_question(std::string_view completion_text) {
    auto trimmed = detail::trim(completion_text);
    if (trimmed.empty()) return {QuestionOutcome::Kind::Rejected, "", QuestionReject::Empty};
    if (detail::ascii_lower(trimmed) == "none")
        return {QuestionOutcome::Kind::NotBiomedical, "", {}};
    auto sentences = detail_distill::split_sentences(trimmed);
    if (sentences.empty()) return {QuestionOutcome::Kind::Rejected, "", QuestionReject::Empty};
    if (sentences.size() > 1)
        return {QuestionOutcome::Kind::Rejected, "", QuestionReject::MultiSentence};
    if (sentences.front().back() != '?')
        return {QuestionOutcome::Kind::Rejected, "", QuestionReject::NotInterrogative};
    return {QuestionOutcome::Kind::Question, std::move(sentences.front()), {}};
}

// ---------------------------------------------------------------------------
// Completion clients

struct TokenUsage {
    long long prompt_tokens = 0;
    long long completion_tokens = 0;

    TokenUsage& operator+=(const TokenUsage& o) {
        prompt_tokens += o.prompt_tokens;
        completion_tokens += o.completion_tokens;
        return *this;
    }
    bool operator==(const TokenUsage&) const = default;
};

struct Completion {
    std::string text;
    TokenUsage usage;
};

class CompletionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CompletionClient {
public:
    virtual ~CompletionClient() = default;
    virtual Completion complete(const PromptMessages& prompt) = 0;
};

namespace detail_distill {

inline std::string_view finding_user_prefix() {
    static const std::string_view prefix =
        kFindingUserTemplate.substr(0, kFindingUserTemplate.find("{abstract}"));
    return prefix;
}

inline std::optional<std::string_view> extract_abstract(std::string_view user) {
    auto prefix = finding_user_prefix();
    if (user.substr(0, prefix.size()) != prefix) return std::nullopt;
    return user.substr(prefix.size());
}

inline std::optional<std::string_view> extract_finding(std::string_view user) {
    constexpr std::string_view open = "[Finding]: ";
    constexpr std::string_view close = ".\nPlease write the most appropriate question";
    auto b = user.find(open);
    if (b == std::string_view::npos) return std::nullopt;
    auto e = user.find(close, b);
    if (e == std::string_view::npos) return std::nullopt;
    return user.substr(b + open.size(), e - b - open.size());
}

}  // namespace detail_distill

// Pure deterministic stand-in for the completion service, keyed by the prompt
// content. Finding prompts echo up to five abstract sentences as numbered
// findings; question prompts hash the finding into one of: a question, the
// 'None' sentinel, or malformed output, so every pipeline branch gets traffic.
class HashMockCompletionClient : public CompletionClient {
public:
    Completion complete(const PromptMessages& prompt) override {
        std::string text;
        if (auto abstract = detail_distill::extract_abstract(prompt.user)) {
            text = findings_for(*abstract);
        } else if (auto finding = detail_distill::extract_finding(prompt.user)) {
            text = question_for(*finding);
        } else {
            throw CompletionError("mock client: unrecognized prompt shape");
        }
        TokenUsage usage{detail_distill::rough_tokens(prompt.system) +
                             detail_distill::rough_tokens(prompt.user),
                         detail_distill::rough_tokens(text)};
        return {std::move(text), usage};
    }

    static std::string findings_for(std::string_view abstract) {
        auto sentences = detail_distill::split_sentences(abstract);
        std::string out;
        std::size_t n = std::min<std::size_t>(sentences.size(), 5);
        for (std::size_t i = 0; i < n; ++i) {
            out += std::to_string(i + 1);
            out += ". ";
            out += sentences[i];
            out += '\n';
        }
        if (out.empty()) out = "No findings.";
        return out;
    }

    static std::string question_for(std::string_view finding) {
        auto h = detail::fnv1a64(finding);
        if (h % 7 == 0) return "None";
        if (h % 13 == 0) return "This is notable. What does it mean?";
        if (h % 17 == 0) return "Consider the implications carefully.";
        auto tokens = detail::word_tokens(finding);
        std::string subject;
        for (std::size_t i = 0; i < std::min<std::size_t>(tokens.size(), 4); ++i) {
            if (!subject.empty()) subject += ' ';
            subject += tokens[i];
        }
        if (subject.empty()) return "What does the finding state?";
        return "What is known about " + subject + "?";
    }
};

// Replays a fixed response list in call order; used to script exact pipeline
// scenarios in tests.
class ScriptedCompletionClient : public CompletionClient {
public:
    struct Entry {
        std::string text;
        TokenUsage usage;
        bool fail = false;
    };

    explicit ScriptedCompletionClient(std::vector<Entry> script) : script_(std::move(script)) {}

    Completion complete(const PromptMessages&) override {
        std::lock_guard lock(mutex_);
        if (next_ >= script_.size()) throw CompletionError("scripted client: script exhausted");
        const auto& entry = script_[next_++];
        if (entry.fail) throw CompletionError("scripted client: injected failure");
        return {entry.text, entry.usage};
    }

    std::size_t calls() const {
        std::lock_guard lock(mutex_);
        return next_;
    }

private:
    mutable std::mutex mutex_;
    std::vector<Entry> script_;
    std::size_t next_ = 0;
};

// ---------------------------------------------------------------------------
// Record/replay clients

inline std::string prompt_key(const PromptMessages& prompt) {
    return detail::sha256_hex(prompt.system + '\x1f' + prompt.user);
}

struct TraceEntry {
    std::string prompt_sha256;
    std::string text;
    TokenUsage usage;
};

inline void write_completion_trace(const std::vector<TraceEntry>& entries, std::ostream& out) {
    for (const auto& e : entries) {
        ordered_json j;
        j["prompt_sha256"] = e.prompt_sha256;
        j["text"] = e.text;
        j["prompt_tokens"] = e.usage.prompt_tokens;
        j["completion_tokens"] = e.usage.completion_tokens;
        out << j.dump() << '\n';
    }
    if (!out) throw IoError("completion trace write failed");
}

inline std::vector<TraceEntry> read_completion_trace(std::istream& in) {
    std::vector<TraceEntry> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        auto j = detail_corpus::parse_line(line, line_no);
        detail_corpus::reject_unknown_keys(
            j, {"prompt_sha256", "text", "prompt_tokens", "completion_tokens"}, line_no);
        TraceEntry e;
        e.prompt_sha256 = detail_corpus::require_string(j, "prompt_sha256", line_no);
        e.text = detail_corpus::require_string(j, "text", line_no);
        e.usage.prompt_tokens = detail_corpus::require_int(j, "prompt_tokens", line_no);
        e.usage.completion_tokens = detail_corpus::require_int(j, "completion_tokens", line_no);
        entries.push_back(std::move(e));
    }
    return entries;
}

// Tees every completion from an inner client into a trace.
class RecordingCompletionClient : public CompletionClient {
public:
    explicit RecordingCompletionClient(CompletionClient& inner) : inner_(inner) {}

    Completion complete(const PromptMessages& prompt) override {
        auto completion = inner_.complete(prompt);
        std::lock_guard lock(mutex_);
        entries_.push_back({prompt_key(prompt), completion.text, completion.usage});
        return completion;
    }

    std::vector<TraceEntry> entries() const {
        std::lock_guard lock(mutex_);
        return entries_;
    }

private:
    CompletionClient& inner_;
    mutable std::mutex mutex_;
    std::vector<TraceEntry> entries_;
};

// Serves completions from a previously recorded trace; unknown prompts fail.
class ReplayCompletionClient : public CompletionClient {
public:
    explicit ReplayCompletionClient(const std::vector<TraceEntry>& entries) {
        for (const auto& e : entries) by_key_[e.prompt_sha256] = e;
    }

    Completion complete(const PromptMessages& prompt) override {
        auto it = by_key_.find(prompt_key(prompt));
        if (it == by_key_.end())
            throw CompletionError("replay client: prompt not present in trace");
        return {it->second.text, it->second.usage};
    }

private:
    std::map<std::string, TraceEntry> by_key_;
};

// ---------------------------------------------------------------------------
// Cost accounting

class NegativePriceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kDefaultPromptPricePer1k = 0.0015;
inline constexpr double kDefaultCompletionPricePer1k = 0.002;

struct StageCost {
    TokenUsage usage;
    double cost = 0.0;
};

struct CostReport {
    StageCost finding;
    StageCost question;
    double total = 0.0;
};

inline CostReport compute_cost(const TokenUsage& finding_usage, const TokenUsage& question_usage,
                               double price_per_1k_prompt = kDefaultPromptPricePer1k,
                               double price_per_1k_completion = kDefaultCompletionPricePer1k) {
    if (price_per_1k_prompt < 0 || price_per_1k_completion < 0)
        throw NegativePriceError("prices must be ≥ 0");
    auto stage = [&](const TokenUsage& u) {
        return StageCost{u, static_cast<double>(u.prompt_tokens) / 1000.0 * price_per_1k_prompt +
                                static_cast<double>(u.completion_tokens) / 1000.0 *
                                    price_per_1k_completion};
    };
    CostReport report;
    report.finding = stage(finding_usage);
    report.question = stage(question_usage);
    report.total = report.finding.cost + report.question.cost;
    return report;
}

// ---------------------------------------------------------------------------
// Pipeline

struct DistillConfig {
    KeywordFilter filter;
    int finding_attempts = 1;  // total tries when the model returns no findings
};

struct DropEvent {
    std::string pmid;
    std::optional<int> finding_index;  // absent for whole-abstract drops
    std::string stage;                 // "findings", "filter", "question"
    std::string reason;
};

struct DistillTrace {
    std::vector<DropEvent> drops;
    long long findings_total = 0;
    long long findings_kept = 0;
    TokenUsage finding_usage;
    TokenUsage question_usage;

    void merge(const DistillTrace& o) {
        drops.insert(drops.end(), o.drops.begin(), o.drops.end());
        findings_total += o.findings_total;
        findings_kept += o.findings_kept;
        finding_usage += o.finding_usage;
        question_usage += o.question_usage;
    }
};

struct DistillResult {
    std::vector<QAPair> pairs;
    std::vector<int> finding_indices;  // parallel to pairs, for cross-record ordering
    DistillTrace trace;
};

class DistillError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Client failure mid-pipeline: carries pmid context plus everything completed
// before the failure.
class DistillClientError : public std::runtime_error {
public:
    DistillClientError(const std::string& pmid, std::optional<int> finding_index,
                       const std::string& what, DistillResult partial)
        : std::runtime_error("pmid " + pmid +
                             (finding_index ? " finding " + std::to_string(*finding_index) : "") +
                             ": " + what),
          pmid_(pmid),
          finding_index_(finding_index),
          partial_(std::move(partial)) {}

    const std::string& pmid() const { return pmid_; }
    std::optional<int> finding_index() const { return finding_index_; }
    const DistillResult& partial() const { return partial_; }

private:
    std::string pmid_;
    std::optional<int> finding_index_;
    DistillResult partial_;
};

inline DistillResult distill_abstract(const PaperRecord& record, CompletionClient& client,
                                      const DistillConfig& config = {}) {
    if (!record.specialty)
        throw DistillError("record " + record.pmid + " has no specialty; route it first");
    DistillResult result;

    std::vector<Finding> findings;
    std::string no_findings_reason;
    int attempts = std::max(config.finding_attempts, 1);
    for (int attempt = 0; attempt < attempts && findings.empty(); ++attempt) {
        auto prompt = render_finding_prompt(record.abstract);
        Completion completion;
        try {
            completion = client.complete(prompt);
        } catch (const CompletionError& e) {
            throw DistillClientError(record.pmid, std::nullopt, e.what(), std::move(result));
        }
        result.trace.finding_usage += completion.usage;
        try {
            findings = parse_findings(completion.text, record.pmid);
        } catch (const NoFindingsError& e) {
            no_findings_reason = e.what();
        }
    }
    if (findings.empty()) {
        result.trace.drops.push_back({record.pmid, std::nullopt, "findings", "NoFindings"});
        return result;
    }
    result.trace.findings_total += static_cast<long long>(findings.size());

    for (const auto& finding : findings) {
        auto verdict = filter_finding(finding, config.filter);
        if (!verdict.kept) {
            result.trace.drops.push_back({record.pmid, finding.index, "filter", *verdict.reason});
            continue;
        }
        Completion completion;
        try {
            completion = client.complete(render_question_prompt(finding));
        } catch (const CompletionError& e) {
            throw DistillClientError(record.pmid, finding.index, e.what(), std::move(result));
        }
        result.trace.question_usage += completion.usage;
        auto outcome = parse_question(completion.text);
        switch (outcome.kind) {
            case QuestionOutcome::Kind::Question:
                result.pairs.push_back(
                    {std::move(outcome.question), finding.text, *record.specialty, record.pmid});
                result.finding_indices.push_back(finding.index);
                ++result.trace.findings_kept;
                break;
            case QuestionOutcome::Kind::NotBiomedical:
                result.trace.drops.push_back(
                    {record.pmid, finding.index, "question", "NotBiomedical"});
                break;
            case QuestionOutcome::Kind::Rejected:
                result.trace.drops.push_back({record.pmid, finding.index, "question",
                                              std::string(to_string(outcome.reject))});
                break;
        }
    }
    return result;
}

// Distills a corpus with a fixed worker count. Results are merged in record
// order and QA pairs finally ordered by (pmid, finding index), so the output
// is identical for any worker count.
inline DistillResult distill_corpus(const std::vector<PaperRecord>& records,
                                    CompletionClient& client, const DistillConfig& config = {},
                                    unsigned workers = 1) {
    workers = std::max(1u, workers);
    std::vector<DistillResult> slots(records.size());
    std::vector<std::exception_ptr> errors(records.size());

    auto worker = [&](unsigned offset) {
        for (std::size_t i = offset; i < records.size(); i += workers) {
            try {
                slots[i] = distill_abstract(records[i], client, config);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        worker(0);
    } else {
        std::vector<std::thread> threads;
        threads.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) threads.emplace_back(worker, w);
        for (auto& t : threads) t.join();
    }
    for (std::size_t i = 0; i < records.size(); ++i)
        if (errors[i]) std::rethrow_exception(errors[i]);

    DistillResult merged;
    for (auto& slot : slots) {
        for (std::size_t i = 0; i < slot.pairs.size(); ++i) {
            merged.pairs.push_back(std::move(slot.pairs[i]));
            merged.finding_indices.push_back(slot.finding_indices[i]);
        }
        merged.trace.merge(slot.trace);
    }
    std::vector<std::size_t> order(merged.pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (merged.pairs[a].source_pmid != merged.pairs[b].source_pmid)
            return merged.pairs[a].source_pmid < merged.pairs[b].source_pmid;
        return merged.finding_indices[a] < merged.finding_indices[b];
    });
    DistillResult sorted;
    sorted.trace = std::move(merged.trace);
    sorted.pairs.reserve(order.size());
    sorted.finding_indices.reserve(order.size());
    for (auto idx : order) {
        sorted.pairs.push_back(std::move(merged.pairs[idx]));
        sorted.finding_indices.push_back(merged.finding_indices[idx]);
    }
    return sorted;
}

inline void write_distill_trace(const DistillTrace& trace, std::ostream& out) {
    for (const auto& d : trace.drops) {
        ordered_json j;
        j["pmid"] = d.pmid;
        if (d.finding_index)
            j["finding_index"] = *d.finding_index;
        else
            j["finding_index"] = nullptr;
        j["stage"] = d.stage;
        j["reason"] = d.reason;
        out << j.dump() << '\n';
    }
    if (!out) throw IoError("distill trace write failed");
}

}  // namespace medfleet
