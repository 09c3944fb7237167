// SPDX-License-Identifier: Apache-2.0
//
// Rate-limited PubMed E-utilities client with a content-addressed disk cache,
// plus the article-set XML parser that turns responses into PaperRecords.
#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "medfleet/corpus.hpp"
#include "medfleet/detail/clock.hpp"
#include "medfleet/detail/sha256.hpp"
#include "medfleet/detail/strings.hpp"
#include "medfleet/detail/xml.hpp"

namespace medfleet {

using detail::XmlSyntaxError;

inline constexpr int kEutilsMaxPageSize = 10000;
inline constexpr std::string_view kDefaultEutilsBase =
    "https://eutils.ncbi.nlm.nih.gov/entrez/eutils";

inline std::string eutils_base_from_env() {
    if (const char* base = std::getenv("MEDFLEET_EUTILS_BASE")) return base;
    return std::string(kDefaultEutilsBase);
}

// ---------------------------------------------------------------------------
// Errors

class EmptyJournalNameError : public std::runtime_error {
public:
    EmptyJournalNameError() : std::runtime_error("journal name is empty") {}
};

class HttpError : public std::runtime_error {
public:
    HttpError(int status, const std::string& what)
        : std::runtime_error("HTTP " + std::to_string(status) + ": " + what), status_(status) {}
    int status() const { return status_; }

private:
    int status_;
};

class RateLimitExceededError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CacheMissError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ServicePayloadError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IngestError : public std::runtime_error {
public:
    IngestError(const std::string& journal, const std::string& what)
        : std::runtime_error("journal '" + journal + "': " + what) {}
};

// ---------------------------------------------------------------------------
// Queries

struct JournalQuery {
    std::string journal_name;
    int min_year = kDefaultMinYear;
    int page_size = 200;
    int page_offset = 0;
};

struct FetchCachePolicy {
    std::filesystem::path cache_dir;
    bool offline_only = false;
    double max_requests_per_second = 3.0;
};

// `"<journal>"[Journal] AND <min_year>:3000[dp]` — one canonical query form.
inline std::string build_journal_query(std::string_view journal_name, int min_year) {
    auto name = detail::trim(journal_name);
    if (name.empty()) throw EmptyJournalNameError();
    return '"' + std::string(name) + "\"[Journal] AND " + std::to_string(min_year) + ":3000[dp]";
}

// ---------------------------------------------------------------------------
// Rate limiting

// Sliding-log limiter: at most floor(rate) acquisitions inside any trailing
// 1-second window (for sub-1 rates, consecutive acquisitions are spaced
// 1/rate apart). Shared across workers; waiting goes through the injected
// clock so tests can drive it with a fake.
class RateLimiter {
public:
    explicit RateLimiter(double max_per_second, detail::Clock& clock = detail::system_clock())
        : rate_(max_per_second), clock_(clock) {
        if (!(rate_ > 0.0)) throw std::invalid_argument("rate must be > 0");
    }

    void acquire() {
        std::lock_guard lock(mutex_);
        double now = clock_.now();
        if (rate_ < 1.0) {
            if (!stamps_.empty()) {
                double earliest = stamps_.back() + 1.0 / rate_;
                if (now < earliest) {
                    clock_.sleep_for(earliest - now);
                    now = clock_.now();
                }
            }
        } else {
            auto limit = static_cast<std::size_t>(rate_);
            if (stamps_.size() >= limit) {
                double window_anchor = stamps_[stamps_.size() - limit];
                double earliest = window_anchor + 1.0;
                if (now < earliest) {
                    clock_.sleep_for(earliest - now);
                    now = clock_.now();
                }
            }
        }
        stamps_.push_back(now);
    }

    std::vector<double> timestamps() const {
        std::lock_guard lock(mutex_);
        return stamps_;
    }

private:
    double rate_;
    detail::Clock& clock_;
    mutable std::mutex mutex_;
    std::vector<double> stamps_;
};

// ---------------------------------------------------------------------------
// Transport

class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    struct Response {
        int status = 0;
        std::string body;
    };
    // origin is scheme://host[:port]; target is the path plus query string.
    virtual Response get(const std::string& origin, const std::string& target) = 0;
};

namespace detail_pubmed {

inline std::string url_encode(std::string_view s) {
    static const char* hex = "0123456789ABCDEF";
    std::string out;
    out.reserve(s.size() * 3 / 2);
    for (unsigned char c : s) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back('%');
            out.push_back(hex[c >> 4]);
            out.push_back(hex[c & 0xF]);
        }
    }
    return out;
}

inline std::pair<std::string, std::string> split_origin(const std::string& base_url) {
    auto scheme_end = base_url.find("://");
    auto path_begin = scheme_end == std::string::npos ? base_url.find('/')
                                                      : base_url.find('/', scheme_end + 3);
    if (path_begin == std::string::npos) return {base_url, ""};
    std::string prefix = base_url.substr(path_begin);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {base_url.substr(0, path_begin), prefix};
}

}  // namespace detail_pubmed

// ---------------------------------------------------------------------------
// XML parsing

struct ParsedArticles {
    std::vector<PaperRecord> records;
    std::vector<std::pair<std::string, std::string>> skipped;  // (pmid, reason)
};

namespace detail_pubmed {

inline std::optional<int> first_four_digit_year(std::string_view text) {
    for (std::size_t i = 0; i + 4 <= text.size(); ++i) {
        bool all = true;
        for (std::size_t k = 0; k < 4; ++k)
            if (!std::isdigit(static_cast<unsigned char>(text[i + k]))) all = false;
        if (all) return 1000 * (text[i] - '0') + 100 * (text[i + 1] - '0') +
                        10 * (text[i + 2] - '0') + (text[i + 3] - '0');
    }
    return std::nullopt;
}

inline std::optional<int> extract_year(const detail::XmlNode& article) {
    const auto* journal = article.first("Journal");
    if (journal) {
        if (const auto* issue = journal->first("JournalIssue")) {
            if (const auto* date = issue->first("PubDate")) {
                if (const auto* year = date->first("Year"))
                    return first_four_digit_year(year->deep_text());
                if (const auto* medline = date->first("MedlineDate"))
                    return first_four_digit_year(medline->deep_text());
            }
        }
    }
    if (const auto* adate = article.first("ArticleDate"))
        if (const auto* year = adate->first("Year"))
            return first_four_digit_year(year->deep_text());
    return std::nullopt;
}

// Labeled sections are joined with single spaces, labels dropped.
inline std::string assemble_abstract(const detail::XmlNode& abstract_node) {
    std::string out;
    for (const auto* section : abstract_node.all("AbstractText")) {
        std::string raw = section->deep_text();
        auto text = detail::trim(raw);
        if (text.empty()) continue;
        if (!out.empty()) out += ' ';
        out += text;
    }
    return out;
}

}  // namespace detail_pubmed

// One record per complete article; incomplete articles land in skipped with a
// reason. Malformed XML throws XmlSyntaxError with a byte position.
inline ParsedArticles parse_pubmed_xml(std::string_view payload) {
    ParsedArticles out;
    auto root = detail::parse_xml(payload);
    for (const auto* article_wrap : root.all("PubmedArticle")) {
        const auto* citation = article_wrap->first("MedlineCitation");
        const auto* pmid_node = citation ? citation->first("PMID") : nullptr;
        std::string pmid =
            pmid_node ? std::string(detail::trim(pmid_node->deep_text())) : std::string();
        const auto* article = citation ? citation->first("Article") : nullptr;
        if (pmid.empty() || !article) {
            out.skipped.emplace_back(pmid, "NoPmid");
            continue;
        }
        const auto* journal = article->first("Journal");
        const auto* journal_title = journal ? journal->first("Title") : nullptr;
        std::string journal_name =
            journal_title ? std::string(detail::trim(journal_title->deep_text())) : std::string();
        if (journal_name.empty()) {
            out.skipped.emplace_back(pmid, "NoJournal");
            continue;
        }
        const auto* abstract_node = article->first("Abstract");
        std::string abstract =
            abstract_node ? detail_pubmed::assemble_abstract(*abstract_node) : std::string();
        if (abstract.empty()) {
            out.skipped.emplace_back(pmid, "NoAbstract");
            continue;
        }
        auto year = detail_pubmed::extract_year(*article);
        if (!year) {
            out.skipped.emplace_back(pmid, "NoYear");
            continue;
        }
        PaperRecord record;
        record.pmid = std::move(pmid);
        record.journal = std::move(journal_name);
        const auto* title = article->first("ArticleTitle");
        record.title = title ? std::string(detail::trim(title->deep_text())) : std::string();
        record.abstract = std::move(abstract);
        record.pub_year = *year;
        out.records.push_back(std::move(record));
    }
    return out;
}

// ---------------------------------------------------------------------------
// E-utilities client

class EutilsClient {
public:
    struct Options {
        std::string base_url = eutils_base_from_env();
        FetchCachePolicy policy;
        std::string api_key;
        int max_attempts = 3;
        double backoff_base_s = 0.5;
        detail::Clock* clock = &detail::system_clock();
    };

    EutilsClient(HttpTransport& transport, Options opts)
        : transport_(transport),
          opts_(std::move(opts)),
          limiter_(opts_.policy.max_requests_per_second, *opts_.clock) {
        auto [origin, prefix] = detail_pubmed::split_origin(opts_.base_url);
        origin_ = origin;
        path_prefix_ = prefix;
        std::filesystem::create_directories(opts_.policy.cache_dir);
    }

    struct SearchPage {
        std::vector<std::string> pmids;
        long long total_count = 0;
    };

    SearchPage search_ids(const JournalQuery& query) {
        if (query.page_size < 1 || query.page_size > kEutilsMaxPageSize)
            throw std::invalid_argument("page_size must be in [1, " +
                                        std::to_string(kEutilsMaxPageSize) + "]");
        if (query.page_offset < 0) throw std::invalid_argument("page_offset must be ≥ 0");
        auto term = build_journal_query(query.journal_name, query.min_year);
        std::string target = path_prefix_ + "/esearch.fcgi?db=pubmed&retmode=xml&term=" +
                             detail_pubmed::url_encode(term) +
                             "&retmax=" + std::to_string(query.page_size) +
                             "&retstart=" + std::to_string(query.page_offset);
        if (!opts_.api_key.empty()) target += "&api_key=" + detail_pubmed::url_encode(opts_.api_key);
        auto body = cached_get("esearch.fcgi", term, query.page_offset, target);

        auto root = detail::parse_xml(body);
        if (const auto* err = root.first("ERROR"))
            throw ServicePayloadError("esearch error: " +
                                      std::string(detail::trim(err->deep_text())));
        SearchPage page;
        if (const auto* count = root.first("Count")) {
            std::string raw = count->deep_text();
            auto text = detail::trim(raw);
            try {
                page.total_count = std::stoll(std::string(text));
            } catch (const std::exception&) {
                throw ServicePayloadError("esearch count is not a number");
            }
        }
        if (const auto* ids = root.first("IdList"))
            for (const auto* id : ids->all("Id"))
                page.pmids.emplace_back(detail::trim(id->deep_text()));
        return page;
    }

    // Raw efetch XML for a pmid batch (cached like every other response).
    std::string fetch_articles_xml(const std::vector<std::string>& pmids) {
        if (pmids.empty()) throw std::invalid_argument("empty pmid batch");
        std::string joined;
        for (const auto& id : pmids) {
            if (!joined.empty()) joined += ',';
            joined += id;
        }
        std::string target = path_prefix_ + "/efetch.fcgi?db=pubmed&retmode=xml&id=" +
                             detail_pubmed::url_encode(joined);
        if (!opts_.api_key.empty()) target += "&api_key=" + detail_pubmed::url_encode(opts_.api_key);
        return cached_get("efetch.fcgi", joined, 0, target);
    }

    long long network_requests() const { return network_requests_.load(); }
    long long cache_hits() const { return cache_hits_.load(); }
    const Options& options() const { return opts_; }
    std::vector<double> request_timestamps() const { return limiter_.timestamps(); }

private:
    std::string cache_path(const std::string& endpoint, const std::string& query,
                           long long page) const {
        auto key = detail::sha256_hex(endpoint + query + std::to_string(page));
        return (opts_.policy.cache_dir / (key + ".xml")).string();
    }

    std::string cached_get(const std::string& endpoint, const std::string& query, long long page,
                           const std::string& target) {
        auto path = cache_path(endpoint, query, page);
        {
            std::ifstream in(path, std::ios::binary);
            if (in) {
                ++cache_hits_;
                std::ostringstream buf;
                buf << in.rdbuf();
                return std::move(buf).str();
            }
        }
        if (opts_.policy.offline_only)
            throw CacheMissError("offline_only set and response not cached: " + target);

        int last_status = 0;
        std::string last_error;
        for (int attempt = 1; attempt <= opts_.max_attempts; ++attempt) {
            if (attempt > 1)
                opts_.clock->sleep_for(opts_.backoff_base_s *
                                       static_cast<double>(1 << (attempt - 2)));
            limiter_.acquire();
            ++network_requests_;
            HttpTransport::Response res;
            try {
                res = transport_.get(origin_, target);
            } catch (const std::exception& e) {
                last_status = 0;
                last_error = e.what();
                continue;
            }
            if (res.status == 429 || res.status >= 500) {
                last_status = res.status;
                last_error = "retryable status";
                continue;
            }
            if (res.status != 200) throw HttpError(res.status, target);
            write_cache(path, res.body);
            return res.body;
        }
        if (last_status == 429)
            throw RateLimitExceededError("service kept returning 429 after " +
                                         std::to_string(opts_.max_attempts) + " attempts");
        throw HttpError(last_status, "request failed after " +
                                        std::to_string(opts_.max_attempts) +
                                        " attempts: " + last_error);
    }

    void write_cache(const std::string& path, const std::string& body) const {
        auto tmp = path + ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary);
            out << body;
            if (!out) throw IoError("cache write failed: " + tmp);
        }
        std::filesystem::rename(tmp, path);  // same-key writers produce identical bytes
    }

    HttpTransport& transport_;
    Options opts_;
    RateLimiter limiter_;
    std::string origin_;
    std::string path_prefix_;
    std::atomic<long long> network_requests_{0};
    std::atomic<long long> cache_hits_{0};
};

// ---------------------------------------------------------------------------
// Journal ingest

struct IngestSummary {
    long long fetched = 0;         // records admitted to the corpus
    long long cached_hits = 0;     // cache hits consumed by this ingest
    long long skipped = 0;         // parse- or validation-skipped articles
    long long network_requests = 0;
};

struct IngestResult {
    std::vector<PaperRecord> records;
    std::vector<std::pair<std::string, std::string>> skipped;  // (pmid, reason)
    IngestSummary summary;
};

inline IngestResult ingest_journal(EutilsClient& client, const std::string& journal_name,
                                   SubSpecialty specialty, int min_year = kDefaultMinYear,
                                   int page_size = 200) {
    long long hits_before = client.cache_hits();
    long long requests_before = client.network_requests();
    IngestResult result;
    try {
        JournalQuery query{journal_name, min_year, page_size, 0};
        std::vector<std::string> ids;
        std::set<std::string> seen;
        long long total = 0;
        do {
            auto page = client.search_ids(query);
            total = page.total_count;
            if (page.pmids.empty()) break;
            for (auto& id : page.pmids)
                if (seen.insert(id).second) ids.push_back(std::move(id));
            query.page_offset += query.page_size;
        } while (query.page_offset < total);

        for (std::size_t begin = 0; begin < ids.size(); begin += static_cast<std::size_t>(page_size)) {
            std::vector<std::string> batch(
                ids.begin() + static_cast<std::ptrdiff_t>(begin),
                ids.begin() + static_cast<std::ptrdiff_t>(
                                  std::min(begin + static_cast<std::size_t>(page_size), ids.size())));
            auto parsed = parse_pubmed_xml(client.fetch_articles_xml(batch));
            for (auto& [pmid, reason] : parsed.skipped)
                result.skipped.emplace_back(std::move(pmid), std::move(reason));
            for (auto& record : parsed.records) {
                record.specialty = specialty;
                if (auto rejection = validate_record(record, min_year)) {
                    result.skipped.emplace_back(record.pmid, rejection->describe());
                    continue;
                }
                result.records.push_back(std::move(record));
            }
        }
    } catch (const std::exception& e) {
        throw IngestError(journal_name, e.what());
    }
    result.summary.fetched = static_cast<long long>(result.records.size());
    result.summary.skipped = static_cast<long long>(result.skipped.size());
    result.summary.cached_hits = client.cache_hits() - hits_before;
    result.summary.network_requests = client.network_requests() - requests_before;
    return result;
}

}  // namespace medfleet
