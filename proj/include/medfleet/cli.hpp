// SPDX-License-Identifier: Apache-2.0
//
// The medfleet command line: ingest, partition, distill, stats, fleet-report,
// simulate, bench. One config file drives everything; flags win over config.
// Exit codes: 0 success, 1 domain error, 2 usage/config error.
#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "medfleet/config.hpp"
#include "medfleet/corpus.hpp"
#include "medfleet/distill.hpp"
#include "medfleet/lora.hpp"
#include "medfleet/partition.hpp"
#include "medfleet/pubmed.hpp"
#include "medfleet/sim.hpp"

namespace medfleet::cli {

// Injection points so tests can run every subcommand hermetically. Null
// members fall back to real implementations (or fail loudly when the command
// genuinely needs the network).
struct RunEnv {
    std::ostream* out = nullptr;  // defaults to std::cout
    std::ostream* err = nullptr;  // defaults to std::cerr
    HttpTransport* transport = nullptr;
    std::function<std::unique_ptr<HttpTransport>()> transport_factory;
    CompletionClient* completion = nullptr;
    std::function<std::unique_ptr<CompletionClient>(const Config&)> live_completion_factory;
};

namespace detail_cli {

class NullTransport : public HttpTransport {
public:
    Response get(const std::string&, const std::string&) override {
        throw std::runtime_error(
            "no network transport configured; use --offline or supply one");
    }
};

inline std::vector<std::uint64_t> parse_seed_spec(const std::string& spec) {
    auto fail = [&]() -> std::uint64_t {
        throw CLI::ValidationError("--seeds",
                                   "expected N, A..B, or a,b,c — got '" + spec + "'");
    };
    auto parse_one = [&](const std::string& tok) -> std::uint64_t {
        auto body = std::string(detail::trim(tok));
        if (body.empty() || body.find_first_not_of("0123456789") != std::string::npos)
            return fail();
        try {
            return std::stoull(body);
        } catch (const std::exception&) {
            return fail();
        }
    };
    std::vector<std::uint64_t> seeds;
    if (auto dots = spec.find(".."); dots != std::string::npos) {
        auto lo = parse_one(spec.substr(0, dots));
        auto hi = parse_one(spec.substr(dots + 2));
        if (hi < lo) fail();
        for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
        return seeds;
    }
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) seeds.push_back(parse_one(tok));
    if (seeds.empty()) fail();
    return seeds;
}

inline void ensure_parent_dir(const std::filesystem::path& file) {
    auto parent = file.parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
}

// Optional per-specialty training-step counts merged into a stats table.
// CSV rows: specialty_code,pt_steps,sft_steps (header line tolerated).
inline void apply_steps_file(std::vector<StatsRow>& rows, const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open steps file: " + path.string());
    if (!rows.empty() && !rows.back().specialty) rows.pop_back();  // re-derive totals below
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        auto fields = detail::parse_csv_row(line);
        if (line_no == 1 && !fields.empty() && detail::trim(fields[0]) == "specialty") continue;
        if (fields.size() != 3)
            throw SchemaError(line_no, "row", "expected specialty,pt_steps,sft_steps");
        auto code = std::string(detail::trim(fields[0]));
        auto specialty = parse_specialty(code);
        if (!specialty) throw UnknownSpecialtyError(code);
        auto parse_steps = [&](const std::string& cell,
                               const char* field) -> std::optional<long long> {
            auto body = std::string(detail::trim(cell));
            if (body.empty()) return std::nullopt;
            try {
                return std::stoll(body);
            } catch (const std::exception&) {
                throw SchemaError(line_no, field, "expected an integer");
            }
        };
        for (auto& row : rows) {
            if (row.specialty == specialty) {
                row.pt_steps = parse_steps(fields[1], "pt_steps");
                row.sft_steps = parse_steps(fields[2], "sft_steps");
            }
        }
    }
    rows.push_back(totals_row(rows));
}

}  // namespace detail_cli

inline int run(std::vector<std::string> args, const RunEnv& env = {}) {
    std::ostream& out = env.out ? *env.out : std::cout;
    std::ostream& err = env.err ? *env.err : std::cerr;
    namespace fs = std::filesystem;

    CLI::App app{"medfleet — journal ingestion, QA distillation, and adapter-fleet "
                 "serving benchmarks"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "Config file (flat TOML-style key = value)");

    auto load_cfg = [&]() {
        Config cfg = config_path.empty() ? Config{} : parse_config(fs::path(config_path));
        return cfg;
    };

    // --- ingest ------------------------------------------------------------
    auto* ing = app.add_subcommand("ingest", "Fetch journal abstracts into a corpus file");
    struct {
        std::vector<std::string> journals;
        std::string specialty;
        std::string out_path;
        bool offline = false;
        int min_year = 0;
        int page_size = 0;
        std::string cache_dir;
    } ingf;
    ing->add_option("--journal", ingf.journals,
                    "Journal to fetch (repeatable; default: every catalog entry)");
    ing->add_option("--specialty", ingf.specialty,
                    "Specialty code stamped on --journal fetches (default: catalog route)");
    ing->add_option("--out", ingf.out_path, "Corpus output path");
    ing->add_flag("--offline", ingf.offline, "Serve from the disk cache only");
    ing->add_option("--min-year", ingf.min_year, "Publication-year floor");
    ing->add_option("--page-size", ingf.page_size, "E-utilities page size");
    ing->add_option("--cache-dir", ingf.cache_dir, "Response cache directory");
    ing->callback([&] {
        auto cfg = load_cfg();
        if (ing->count("--min-year")) cfg.min_year = ingf.min_year;
        if (ing->count("--page-size")) cfg.page_size = ingf.page_size;
        if (ing->count("--cache-dir")) cfg.cache_dir = ingf.cache_dir;
        if (ingf.offline) cfg.offline_only = true;
        validate_config(cfg);

        std::unique_ptr<HttpTransport> owned;
        HttpTransport* transport = env.transport;
        if (!transport && env.transport_factory) {
            owned = env.transport_factory();
            transport = owned.get();
        }
        if (!transport) {
            owned = std::make_unique<detail_cli::NullTransport>();
            transport = owned.get();
        }
        EutilsClient::Options opts;
        if (!cfg.eutils_base.empty()) opts.base_url = cfg.eutils_base;
        opts.policy.cache_dir = cfg.cache_dir;
        opts.policy.offline_only = cfg.offline_only;
        opts.policy.max_requests_per_second = cfg.rate_limit_rps;
        EutilsClient client(*transport, std::move(opts));

        std::vector<std::pair<std::string, SubSpecialty>> targets;
        std::optional<JournalCatalog> catalog;
        auto the_catalog = [&]() -> JournalCatalog& {
            if (!catalog) catalog = load_catalog(fs::path(cfg.catalog_path));
            return *catalog;
        };
        if (ingf.journals.empty()) {
            for (const auto& [name, specialty] : the_catalog().entries())
                targets.emplace_back(name, specialty);
        } else {
            std::optional<SubSpecialty> forced;
            if (!ingf.specialty.empty()) {
                forced = parse_specialty(ingf.specialty);
                if (!forced)
                    throw CLI::ValidationError("--specialty",
                                               "unknown specialty code '" + ingf.specialty + "'");
            }
            for (const auto& journal : ingf.journals)
                targets.emplace_back(journal,
                                     forced ? *forced : the_catalog().route(journal));
        }

        std::vector<PaperRecord> records;
        IngestSummary totals;
        for (const auto& [journal, specialty] : targets) {
            auto result = ingest_journal(client, journal, specialty, cfg.min_year, cfg.page_size);
            records.insert(records.end(), std::make_move_iterator(result.records.begin()),
                           std::make_move_iterator(result.records.end()));
            totals.fetched += result.summary.fetched;
            totals.cached_hits += result.summary.cached_hits;
            totals.skipped += result.summary.skipped;
            totals.network_requests += result.summary.network_requests;
        }

        fs::path out_path = ingf.out_path.empty() ? fs::path(cfg.corpus_dir) / "corpus.jsonl"
                                                  : fs::path(ingf.out_path);
        detail_cli::ensure_parent_dir(out_path);
        write_corpus(records, out_path);

        ordered_json summary;
        summary["command"] = "ingest";
        summary["journals"] = targets.size();
        summary["records"] = records.size();
        summary["skipped"] = totals.skipped;
        summary["cache_hits"] = totals.cached_hits;
        summary["network_requests"] = totals.network_requests;
        summary["output"] = out_path.string();
        out << summary.dump() << '\n';
    });

    // --- partition -----------------------------------------------------------
    auto* part = app.add_subcommand("partition",
                                    "Split a corpus into per-specialty files via the catalog");
    struct {
        std::string corpus;
        std::string out_dir;
    } partf;
    part->add_option("--corpus", partf.corpus, "Corpus input path");
    part->add_option("--out", partf.out_dir, "Output directory");
    part->callback([&] {
        auto cfg = load_cfg();
        auto catalog = load_catalog(fs::path(cfg.catalog_path));
        fs::path corpus_path = partf.corpus.empty() ? fs::path(cfg.corpus_dir) / "corpus.jsonl"
                                                    : fs::path(partf.corpus);
        auto records = read_corpus(corpus_path);
        fs::path out_dir = partf.out_dir.empty() ? fs::path(cfg.output_dir) / "partitioned"
                                                 : fs::path(partf.out_dir);
        auto counts = write_partitioned_corpus(records, catalog, out_dir);

        ordered_json by_specialty;
        for (const auto& [specialty, count] : counts)
            by_specialty[std::string(to_code(specialty))] = count;
        ordered_json summary;
        summary["command"] = "partition";
        summary["records"] = records.size();
        summary["files"] = counts.size();
        summary["counts"] = by_specialty;
        summary["output"] = out_dir.string();
        out << summary.dump() << '\n';
    });

    // --- distill -------------------------------------------------------------
    auto* dist = app.add_subcommand("distill",
                                    "Generate a QA dataset from a corpus via two-stage prompting");
    struct {
        std::string corpus;
        std::string out_path;
        std::string trace_path;
        std::string record_path;
        std::string replay_path;
        std::string client;
        int workers = 0;
    } distf;
    dist->add_option("--corpus", distf.corpus, "Corpus input path");
    dist->add_option("--out", distf.out_path, "QA dataset output path");
    dist->add_option("--trace", distf.trace_path, "Drop-event trace output path");
    dist->add_option("--record", distf.record_path, "Record every completion to this trace file");
    dist->add_option("--replay", distf.replay_path, "Completion trace for the replay client");
    dist->add_option("--client", distf.client, "Completion client: mock, replay, or live");
    dist->add_option("--workers", distf.workers, "Concurrent distillation workers");
    dist->callback([&] {
        auto cfg = load_cfg();
        if (dist->count("--client")) cfg.completion_client = distf.client;
        if (dist->count("--replay")) cfg.completion_trace = distf.replay_path;
        if (dist->count("--workers")) cfg.workers = distf.workers;
        validate_config(cfg);

        fs::path corpus_path = distf.corpus.empty() ? fs::path(cfg.corpus_dir) / "corpus.jsonl"
                                                    : fs::path(distf.corpus);
        auto records = read_corpus(corpus_path);
        std::optional<JournalCatalog> catalog;
        for (auto& record : records) {
            if (record.specialty) continue;
            if (!catalog) catalog = load_catalog(fs::path(cfg.catalog_path));
            record.specialty = catalog->route(record.journal);
        }

        std::unique_ptr<CompletionClient> owned;
        CompletionClient* base = env.completion;
        if (!base) {
            if (cfg.completion_client == "mock") {
                owned = std::make_unique<HashMockCompletionClient>();
            } else if (cfg.completion_client == "replay") {
                if (cfg.completion_trace.empty())
                    throw ConfigTypeError("completion_trace", "required for the replay client");
                std::ifstream in(cfg.completion_trace, std::ios::binary);
                if (!in)
                    throw ConfigTypeError("completion_trace",
                                          "cannot open " + cfg.completion_trace);
                owned = std::make_unique<ReplayCompletionClient>(read_completion_trace(in));
            } else {  // live
                if (!env.live_completion_factory)
                    throw ConfigTypeError("completion_client",
                                          "live client is not available here");
                owned = env.live_completion_factory(cfg);
            }
            base = owned.get();
        }
        RecordingCompletionClient recorder(*base);
        CompletionClient& client = distf.record_path.empty()
                                       ? *base
                                       : static_cast<CompletionClient&>(recorder);

        DistillConfig dconf{make_filter(cfg), cfg.finding_attempts};
        auto result = distill_corpus(records, client, dconf,
                                     static_cast<unsigned>(cfg.workers));

        fs::path out_path = distf.out_path.empty() ? fs::path(cfg.output_dir) / "qa.jsonl"
                                                   : fs::path(distf.out_path);
        detail_cli::ensure_parent_dir(out_path);
        write_qa_pairs(result.pairs, out_path);

        fs::path trace_path = distf.trace_path.empty()
                                  ? fs::path(cfg.output_dir) / "distill_trace.jsonl"
                                  : fs::path(distf.trace_path);
        detail_cli::ensure_parent_dir(trace_path);
        {
            std::ofstream trace_out(trace_path, std::ios::binary);
            if (!trace_out) throw IoError("cannot open for writing: " + trace_path.string());
            write_distill_trace(result.trace, trace_out);
        }
        if (!distf.record_path.empty()) {
            fs::path record_path(distf.record_path);
            detail_cli::ensure_parent_dir(record_path);
            std::ofstream record_out(record_path, std::ios::binary);
            if (!record_out) throw IoError("cannot open for writing: " + record_path.string());
            write_completion_trace(recorder.entries(), record_out);
        }

        auto cost = compute_cost(result.trace.finding_usage, result.trace.question_usage,
                                 cfg.price_per_1k_prompt, cfg.price_per_1k_completion);
        ordered_json summary;
        summary["command"] = "distill";
        summary["records"] = records.size();
        summary["pairs"] = result.pairs.size();
        summary["findings_total"] = result.trace.findings_total;
        summary["findings_kept"] = result.trace.findings_kept;
        summary["drops"] = result.trace.drops.size();
        summary["prompt_tokens"] =
            result.trace.finding_usage.prompt_tokens + result.trace.question_usage.prompt_tokens;
        summary["completion_tokens"] = result.trace.finding_usage.completion_tokens +
                                       result.trace.question_usage.completion_tokens;
        summary["cost_usd"] = cost.total;
        summary["output"] = out_path.string();
        summary["trace"] = trace_path.string();
        out << summary.dump() << '\n';
    });

    // --- stats ---------------------------------------------------------------
    auto* stats = app.add_subcommand("stats", "Tabulate per-specialty corpus statistics");
    struct {
        std::string corpus;
        std::string qa;
        std::string out_path;
        std::string steps;
    } statf;
    stats->add_option("--corpus", statf.corpus, "Corpus input path");
    stats->add_option("--qa", statf.qa, "QA dataset to count per specialty");
    stats->add_option("--out", statf.out_path, "Stats CSV output path");
    stats->add_option("--steps", statf.steps,
                      "CSV of specialty,pt_steps,sft_steps to merge into the table");
    stats->callback([&] {
        auto cfg = load_cfg();
        auto catalog = load_catalog(fs::path(cfg.catalog_path));
        fs::path corpus_path = statf.corpus.empty() ? fs::path(cfg.corpus_dir) / "corpus.jsonl"
                                                    : fs::path(statf.corpus);
        auto records = read_corpus(corpus_path);
        auto tokenizer = make_tokenizer(cfg.tokenizer);
        std::optional<std::vector<QAPair>> qa;
        if (!statf.qa.empty()) qa = read_qa_pairs(fs::path(statf.qa));
        auto rows = compute_stats(records, catalog, tokenizer, qa ? &*qa : nullptr);
        if (!statf.steps.empty()) detail_cli::apply_steps_file(rows, fs::path(statf.steps));

        fs::path out_path = statf.out_path.empty() ? fs::path(cfg.output_dir) / "stats.csv"
                                                   : fs::path(statf.out_path);
        detail_cli::ensure_parent_dir(out_path);
        write_stats_csv(rows, out_path);

        const auto& totals = rows.back();
        ordered_json summary;
        summary["command"] = "stats";
        summary["rows"] = rows.size();
        summary["journals"] = totals.journals;
        summary["papers"] = totals.papers;
        summary["tokens"] = totals.tokens;
        summary["qa_pairs"] = totals.qa_pairs;
        summary["output"] = out_path.string();
        out << summary.dump() << '\n';
    });

    // --- fleet-report ----------------------------------------------------------
    auto* fleet = app.add_subcommand(
        "fleet-report", "Write the adapter-fleet manifest and size/capacity table");
    struct {
        std::string out_path;
        double budget_gb = 0.0;
    } fleetf;
    fleet->add_option("--out", fleetf.out_path, "Adapter manifest output path");
    fleet->add_option("--budget-gb", fleetf.budget_gb, "Accelerator memory budget (GB)");
    fleet->callback([&] {
        auto cfg = load_cfg();
        if (fleet->count("--budget-gb")) cfg.memory_budget_gb = fleetf.budget_gb;
        validate_config(cfg);

        auto model = make_fixture_model();
        model.param_count = cfg.model_params;
        model.bytes_per_param = cfg.bytes_per_param;
        auto adapters = make_fixture_fleet(model, cfg.fleet_seed);

        fs::path out_path = fleetf.out_path.empty() ? fs::path(cfg.output_dir) / "adapters.jsonl"
                                                    : fs::path(fleetf.out_path);
        detail_cli::ensure_parent_dir(out_path);
        write_adapter_manifest(adapters, out_path);

        long long adapter_params = 0;
        out << std::left << std::setw(10) << "specialty" << std::right << std::setw(8)
            << "layers" << std::setw(12) << "params" << std::setw(16) << "bytes" << '\n';
        for (const auto& adapter : adapters) {
            adapter_params += adapter.param_count();
            out << std::left << std::setw(10) << to_code(adapter.specialty) << std::right
                << std::setw(8) << adapter.deltas.size() << std::setw(12)
                << adapter.param_count() << std::setw(16)
                << detail::format_fixed(adapter.weight_bytes(model.bytes_per_param), 0) << '\n';
        }
        out << std::left << std::setw(10) << "base" << std::right << std::setw(8) << "-"
            << std::setw(12) << model.param_count << std::setw(16)
            << detail::format_fixed(model.memory_bytes(), 0) << '\n';

        auto budget_bytes = cfg.memory_budget_gb * 1e9;
        auto slots = capacity(budget_bytes, model);
        ordered_json summary;
        summary["command"] = "fleet-report";
        summary["adapters"] = adapters.size();
        summary["adapter_params"] = adapter_params;
        summary["model_bytes"] = model.memory_bytes();
        summary["budget_gb"] = cfg.memory_budget_gb;
        summary["capacity"] = slots;
        summary["output"] = out_path.string();
        out << summary.dump() << '\n';
    });

    // --- simulate ----------------------------------------------------------------
    auto* sim = app.add_subcommand("simulate", "Run one serving simulation");
    struct {
        std::string strategy;
        int requests = 0;
        std::uint64_t seed = 0;
        int capacity = 0;
        std::string report_path;
        std::string events_path;
        bool count_warmup = false;
        bool literal_protocol = false;
    } simf;
    sim->add_option("--strategy", simf.strategy, "full or lora")->required();
    sim->add_option("--requests", simf.requests, "Number of requests");
    sim->add_option("--seed", simf.seed, "Simulation seed");
    sim->add_option("--capacity", simf.capacity, "Resident full-model slots");
    sim->add_option("--out", simf.report_path, "Report CSV output path");
    sim->add_option("--events", simf.events_path, "Event log (JSONL) output path");
    sim->add_flag("--count-warmup", simf.count_warmup, "Charge the t=0 warm-up loads");
    sim->add_flag("--literal-protocol", simf.literal_protocol,
                  "Full-swap: reload a fresh random model set before every request");
    sim->callback([&] {
        auto cfg = load_cfg();
        if (sim->count("--requests")) cfg.requests = simf.requests;
        if (sim->count("--seed")) cfg.seed = simf.seed;
        if (sim->count("--capacity")) cfg.capacity = simf.capacity;
        if (simf.count_warmup) cfg.count_warmup = true;
        if (simf.literal_protocol) cfg.literal_protocol = true;
        validate_config(cfg);

        auto parsed = parse_strategy(simf.strategy);
        if (!parsed)
            throw CLI::ValidationError("--strategy",
                                       "expected full or lora, got '" + simf.strategy + "'");
        Strategy strategy = *parsed;
        auto timing = make_timing_model(cfg);
        auto workload = generate_workload(static_cast<std::size_t>(cfg.requests), cfg.seed);
        SimOptions opts;
        opts.count_warmup = cfg.count_warmup;
        opts.literal_protocol = cfg.literal_protocol;
        auto report = run_simulation(strategy, workload, timing,
                                     static_cast<std::size_t>(cfg.capacity), cfg.seed, opts);
        report.run = 1;

        fs::path report_path = simf.report_path.empty() ? fs::path(cfg.output_dir) / "report.csv"
                                                        : fs::path(simf.report_path);
        detail_cli::ensure_parent_dir(report_path);
        {
            std::ofstream os(report_path, std::ios::binary);
            if (!os) throw IoError("cannot open for writing: " + report_path.string());
            write_reports_csv({report}, os);
        }
        fs::path events_path = simf.events_path.empty() ? fs::path(cfg.output_dir) / "events.jsonl"
                                                        : fs::path(simf.events_path);
        detail_cli::ensure_parent_dir(events_path);
        {
            std::ofstream os(events_path, std::ios::binary);
            if (!os) throw IoError("cannot open for writing: " + events_path.string());
            write_events_jsonl(report, os);
        }

        ordered_json summary;
        summary["command"] = "simulate";
        summary["strategy"] = std::string(to_string(strategy));
        summary["requests"] = cfg.requests;
        summary["seed"] = cfg.seed;
        summary["total_time_s"] = report.total_time_s;
        summary["model_loads"] = report.model_loads;
        summary["weight_loads"] = report.weight_loads;
        summary["report"] = report_path.string();
        summary["events"] = events_path.string();
        out << summary.dump() << '\n';
    });

    // --- bench ---------------------------------------------------------------------
    auto* bench = app.add_subcommand(
        "bench", "Compare full-model swapping against adapter swapping over repeated runs");
    struct {
        int runs = 0;
        std::string seeds;
        int requests = 0;
        int capacity = 0;
        std::string bench_path;
        std::string report_path;
        bool count_warmup = false;
        bool literal_protocol = false;
    } benchf;
    bench->add_option("--runs", benchf.runs, "Number of paired runs");
    bench->add_option("--seeds", benchf.seeds, "Seed list: N, A..B, or a,b,c");
    bench->add_option("--requests", benchf.requests, "Requests per run");
    bench->add_option("--capacity", benchf.capacity, "Resident full-model slots");
    bench->add_option("--out", benchf.bench_path, "Comparison CSV output path");
    bench->add_option("--report", benchf.report_path, "Per-run report CSV output path");
    bench->add_flag("--count-warmup", benchf.count_warmup, "Charge the t=0 warm-up loads");
    bench->add_flag("--literal-protocol", benchf.literal_protocol,
                    "Full-swap: reload a fresh random model set before every request");
    bench->callback([&] {
        auto cfg = load_cfg();
        if (bench->count("--runs")) cfg.runs = benchf.runs;
        if (bench->count("--requests")) cfg.requests = benchf.requests;
        if (bench->count("--capacity")) cfg.capacity = benchf.capacity;
        if (benchf.count_warmup) cfg.count_warmup = true;
        if (benchf.literal_protocol) cfg.literal_protocol = true;
        validate_config(cfg);

        std::vector<std::uint64_t> seeds;
        if (bench->count("--seeds")) {
            seeds = detail_cli::parse_seed_spec(benchf.seeds);
            if (bench->count("--runs") &&
                seeds.size() != static_cast<std::size_t>(cfg.runs))
                throw CLI::ValidationError("--seeds",
                                           "seed count does not match --runs");
        } else {
            for (int i = 1; i <= cfg.runs; ++i)
                seeds.push_back(cfg.seed + static_cast<std::uint64_t>(i) - 1);
        }

        auto timing = make_timing_model(cfg);
        SimOptions opts;
        opts.count_warmup = cfg.count_warmup;
        opts.literal_protocol = cfg.literal_protocol;
        std::vector<SimReport> reports;
        for (Strategy strategy : {Strategy::FullSwap, Strategy::LoraSwap}) {
            for (std::size_t i = 0; i < seeds.size(); ++i) {
                auto workload =
                    generate_workload(static_cast<std::size_t>(cfg.requests), seeds[i]);
                auto report = run_simulation(strategy, workload, timing,
                                             static_cast<std::size_t>(cfg.capacity), seeds[i],
                                             opts);
                report.run = static_cast<int>(i) + 1;
                reports.push_back(std::move(report));
            }
        }
        auto table = summarize(reports);

        fs::path bench_path = benchf.bench_path.empty() ? fs::path(cfg.output_dir) / "bench.csv"
                                                        : fs::path(benchf.bench_path);
        detail_cli::ensure_parent_dir(bench_path);
        {
            std::ofstream os(bench_path, std::ios::binary);
            if (!os) throw IoError("cannot open for writing: " + bench_path.string());
            write_bench_csv(table, os);
        }
        fs::path report_path = benchf.report_path.empty()
                                   ? fs::path(cfg.output_dir) / "bench_runs.csv"
                                   : fs::path(benchf.report_path);
        detail_cli::ensure_parent_dir(report_path);
        {
            std::ofstream os(report_path, std::ios::binary);
            if (!os) throw IoError("cannot open for writing: " + report_path.string());
            write_reports_csv(reports, os);
        }

        auto metric_of = [&](Strategy s, const std::string& metric) -> const BenchRow* {
            for (const auto& row : table.rows)
                if (row.strategy == s && row.metric == metric) return &row;
            return nullptr;
        };
        ordered_json summary;
        summary["command"] = "bench";
        summary["runs"] = seeds.size();
        summary["requests"] = cfg.requests;
        if (const auto* r = metric_of(Strategy::FullSwap, "total_time_s")) {
            summary["full_mean_s"] = r->mean;
            summary["full_sd_s"] = r->sd;
        }
        if (const auto* r = metric_of(Strategy::LoraSwap, "total_time_s")) {
            summary["lora_mean_s"] = r->mean;
            summary["lora_sd_s"] = r->sd;
        }
        summary["bench"] = bench_path.string();
        summary["report"] = report_path.string();
        out << summary.dump() << '\n';
    });

    std::reverse(args.begin(), args.end());
    try {
        app.parse(std::move(args));
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

inline int run(int argc, const char* const* argv, const RunEnv& env = {}) {
    std::vector<std::string> args;
    args.reserve(argc > 0 ? static_cast<std::size_t>(argc) - 1 : 0);
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(std::move(args), env);
}

}  // namespace medfleet::cli
