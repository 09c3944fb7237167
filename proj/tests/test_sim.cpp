// SPDX-License-Identifier: Apache-2.0
//
// Serving-benchmark simulation: workload generation, timing distributions,
// per-request handlers, whole runs, and the Table-style summaries.

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "medfleet/lora.hpp"
#include "medfleet/sim.hpp"

using namespace medfleet;
using Catch::Approx;

namespace {

SimReport run_default(Strategy strategy, std::uint64_t seed, const SimOptions& opts = {}) {
    auto workload = generate_workload(100, seed);
    return run_simulation(strategy, workload, TimingModel{}, 5, seed, opts);
}

double sum_event_durations(const SimReport& report) {
    double total = 0.0;
    for (const auto& e : report.events) total += e.duration_s;
    return total;
}

long long count_kind(const SimReport& report, EventKind kind) {
    long long n = 0;
    for (const auto& e : report.events) n += e.kind == kind ? 1 : 0;
    return n;
}

std::string fixed2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

// Sample sd recomputed from scratch, independent of detail_sim.
double oracle_sd(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

SimReport table_row(Strategy s, int run, double total, long long model_loads,
                    long long weight_loads) {
    SimReport r;
    r.strategy = s;
    r.run = run;
    r.seed = static_cast<std::uint64_t>(run);
    r.total_time_s = total;
    r.model_loads = model_loads;
    r.weight_loads = weight_loads;
    return r;
}

}  // namespace

TEST_CASE("strategy names parse and print") {
    CHECK(to_string(Strategy::FullSwap) == "full");
    CHECK(to_string(Strategy::LoraSwap) == "lora");
    CHECK(parse_strategy("full") == Strategy::FullSwap);
    CHECK(parse_strategy(" FULL-swap ") == Strategy::FullSwap);
    CHECK(parse_strategy("FullSwap") == Strategy::FullSwap);
    CHECK(parse_strategy("lora") == Strategy::LoraSwap);
    CHECK(parse_strategy("LoRA-Swap") == Strategy::LoraSwap);
    CHECK_FALSE(parse_strategy("gpu").has_value());
    CHECK_FALSE(parse_strategy("").has_value());
}

TEST_CASE("workload generation is deterministic and uniform") {
    SECTION("same seed, same workload") {
        auto a = generate_workload(100, 7);
        auto b = generate_workload(100, 7);
        REQUIRE(a.size() == 100);
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].seq == static_cast<int>(i + 1));
            CHECK(a[i].specialty == b[i].specialty);
        }
    }
    SECTION("different seeds differ") {
        auto a = generate_workload(100, 1);
        auto b = generate_workload(100, 2);
        bool same = true;
        for (std::size_t i = 0; i < a.size(); ++i) same = same && a[i].specialty == b[i].specialty;
        CHECK_FALSE(same);
    }
    SECTION("single request") {
        auto w = generate_workload(1, 3);
        REQUIRE(w.size() == 1);
        CHECK(w[0].seq == 1);
    }
    SECTION("specialties are roughly uniform") {
        auto w = generate_workload(11000, 5);
        std::map<SubSpecialty, int> counts;
        for (const auto& r : w) ++counts[r.specialty];
        REQUIRE(counts.size() == kAllSpecialties.size());
        for (const auto& [s, n] : counts) {
            INFO("specialty " << to_code(s));
            CHECK(n > 850);
            CHECK(n < 1150);
        }
    }
    SECTION("empty workload is rejected") {
        CHECK_THROWS_AS(generate_workload(0, 1), SimConfigError);
    }
}

TEST_CASE("inference-time distributions") {
    SECTION("default is mean-matched over the published support") {
        auto d = InferDist::defaults();
        CHECK(d.kind == InferDist::Kind::MeanMatchedTriangular);
        CHECK(d.expected_mean() == 2.25);
        CHECK_NOTHROW(d.validate());
        CHECK(d.left_weight() > 0.0);
        CHECK(d.left_weight() < 1.0);
    }
    SECTION("plain triangular cannot hit the published mean") {
        auto d = InferDist::triangular(0.36, 2.24, 6.40);
        CHECK_NOTHROW(d.validate());
        CHECK(d.expected_mean() == Approx(3.0));
    }
    SECTION("samples stay in range and average to the target") {
        auto d = InferDist::defaults();
        detail::Rng rng(99);
        double sum = 0.0;
        constexpr int kDraws = 10000;
        for (int i = 0; i < kDraws; ++i) {
            double t = d.sample(rng);
            REQUIRE(t >= 0.36);
            REQUIRE(t <= 6.40);
            sum += t;
        }
        CHECK(sum / kDraws == Approx(2.25).margin(0.06));
    }
    SECTION("fixed distribution consumes no randomness") {
        auto d = InferDist::fixed(2.25);
        detail::Rng used(42), fresh(42);
        CHECK(d.sample(used) == 2.25);
        CHECK(d.sample(used) == 2.25);
        CHECK(used.unit() == fresh.unit());
    }
    SECTION("empirical distribution resamples its trace") {
        auto d = InferDist::empirical({1.0, 2.0, 4.0});
        CHECK_NOTHROW(d.validate());
        CHECK(d.expected_mean() == Approx(7.0 / 3.0));
        detail::Rng rng(1);
        for (int i = 0; i < 100; ++i) {
            double t = d.sample(rng);
            CHECK((t == 1.0 || t == 2.0 || t == 4.0));
        }
    }
    SECTION("invalid parameters are rejected") {
        CHECK_THROWS_AS(InferDist::fixed(-1.0).validate(), InvalidTimingError);
        CHECK_THROWS_AS(InferDist::triangular(2.0, 1.0, 3.0).validate(), InvalidTimingError);
        CHECK_THROWS_AS(InferDist::mean_matched(1.0, 1.0, 1.0, 1.0).validate(),
                        InvalidTimingError);
        // 1.9 lies inside [0, 2] but above the attainable mean range.
        CHECK_THROWS_AS(InferDist::mean_matched(0.0, 1.0, 2.0, 1.9).validate(),
                        InvalidTimingError);
        CHECK_THROWS_AS(InferDist::empirical({}).validate(), InvalidTimingError);
        CHECK_THROWS_AS(InferDist::empirical({1.0, -2.0}).validate(), InvalidTimingError);
    }
    SECTION("timing model validation") {
        CHECK_NOTHROW(TimingModel{}.validate());
        TimingModel bad;
        bad.full_model_load_s = 0.0;
        CHECK_THROWS_AS(bad.validate(), InvalidTimingError);
        bad = TimingModel{};
        bad.adapter_swap_overhead_s = 0.0;
        CHECK_THROWS_AS(bad.validate(), InvalidTimingError);
        bad = TimingModel{};
        bad.unload_s = -1.0;
        CHECK_THROWS_AS(bad.validate(), InvalidTimingError);
    }
}

TEST_CASE("per-request handlers") {
    TimingModel timing;
    timing.infer = InferDist::fixed(2.25);
    detail::Rng evict(1), infer(2);

    SECTION("cache hit infers without loading") {
        CacheState state{{SubSpecialty::ALL, SubSpecialty::CAR}, 2};
        auto events = handle_request_full(state, {1, SubSpecialty::CAR}, timing, evict, infer);
        REQUIRE(events.size() == 1);
        CHECK(events[0].kind == EventKind::Infer);
        CHECK(events[0].duration_s == 2.25);
        CHECK(state.slots == std::vector<SubSpecialty>{SubSpecialty::ALL, SubSpecialty::CAR});
    }
    SECTION("cache miss evicts one resident and loads the requested model") {
        CacheState state{{SubSpecialty::ALL, SubSpecialty::CAR}, 2};
        auto events = handle_request_full(state, {1, SubSpecialty::MET}, timing, evict, infer);
        REQUIRE(events.size() == 3);
        CHECK(events[0].kind == EventKind::ModelUnload);
        CHECK(events[1].kind == EventKind::ModelLoad);
        CHECK(events[1].specialty == SubSpecialty::MET);
        CHECK(events[1].duration_s == 5.0);
        CHECK(events[2].kind == EventKind::Infer);
        CHECK(state.slots.size() == 2);
        CHECK(state.resident(SubSpecialty::MET));
        // The evicted resident is gone.
        CHECK_FALSE((state.resident(SubSpecialty::ALL) && state.resident(SubSpecialty::CAR)));
    }
    SECTION("lora requests load weights every time and leave the cache alone") {
        CacheState state{{}, 5};
        auto first = handle_request_lora(state, {1, SubSpecialty::GAS}, timing, infer);
        auto second = handle_request_lora(state, {2, SubSpecialty::GAS}, timing, infer);
        REQUIRE(first.size() == 2);
        REQUIRE(second.size() == 2);
        CHECK(first[0].kind == EventKind::WeightLoad);
        CHECK(first[0].duration_s == 0.90);
        CHECK(first[1].kind == EventKind::Infer);
        CHECK(second[0].kind == EventKind::WeightLoad);  // same specialty still reloads
        CHECK(state.slots.empty());
    }
    SECTION("a fleet registry gates lora requests") {
        AdapterRegistry fleet;
        AdapterSpec car;
        car.specialty = SubSpecialty::CAR;
        fleet.register_adapter(std::move(car));
        CacheState state{{}, 5};
        CHECK_NOTHROW(handle_request_lora(state, {1, SubSpecialty::CAR}, timing, infer, &fleet));
        CHECK_THROWS_AS(handle_request_lora(state, {2, SubSpecialty::RHE}, timing, infer, &fleet),
                        UnknownSpecialtyError);
    }
}

TEST_CASE("full-swap simulation accounting is exact under fixed timings") {
    TimingModel timing;
    timing.infer = InferDist::fixed(2.25);

    SECTION("total decomposes into loads plus inference for any seed") {
        bool saw_54 = false;
        for (std::uint64_t seed = 1; seed <= 200; ++seed) {
            auto workload = generate_workload(100, seed);
            auto report = run_simulation(Strategy::FullSwap, workload, timing, 5, seed);
            // 5.0 and 2.25 are binary-exact, so the sum is too.
            CHECK(report.total_time_s ==
                  static_cast<double>(report.model_loads) * 5.0 + 100 * 2.25);
            CHECK(report.weight_loads == 0);
            if (report.model_loads == 54) {
                saw_54 = true;
                CHECK(report.total_time_s == 495.0);
            }
        }
        CHECK(saw_54);  // 54 misses sits at the center of the observed range
    }
    SECTION("lora total is closed-form") {
        auto workload = generate_workload(100, 7);
        auto report = run_simulation(Strategy::LoraSwap, workload, timing, 5, 7);
        CHECK(report.weight_loads == 100);
        CHECK(report.model_loads == 0);
        CHECK(report.total_time_s == Approx(100 * (0.90 + 2.25)).margin(1e-9));
    }
    SECTION("full capacity means no misses") {
        auto workload = generate_workload(100, 9);
        auto report = run_simulation(Strategy::FullSwap, workload, timing, 11, 9);
        CHECK(report.model_loads == 0);
        CHECK(report.total_time_s == 225.0);
    }
}

TEST_CASE("simulation runs are deterministic and conserve event time") {
    SECTION("same seed reproduces the identical report") {
        auto a = run_default(Strategy::FullSwap, 13);
        auto b = run_default(Strategy::FullSwap, 13);
        CHECK(a.total_time_s == b.total_time_s);
        CHECK(a.model_loads == b.model_loads);
        REQUIRE(a.events.size() == b.events.size());
        for (std::size_t i = 0; i < a.events.size(); ++i)
            CHECK(a.events[i].duration_s == b.events[i].duration_s);
    }
    SECTION("total time equals the sum of event durations") {
        for (auto strategy : {Strategy::FullSwap, Strategy::LoraSwap}) {
            auto report = run_default(strategy, 21);
            CHECK(report.total_time_s == sum_event_durations(report));
        }
    }
    SECTION("event counts follow the protocol") {
        auto full = run_default(Strategy::FullSwap, 17);
        CHECK(count_kind(full, EventKind::WarmupLoad) == 5);
        CHECK(count_kind(full, EventKind::Infer) == 100);
        CHECK(count_kind(full, EventKind::ModelLoad) == full.model_loads);
        CHECK(count_kind(full, EventKind::ModelUnload) == full.model_loads);

        auto lora = run_default(Strategy::LoraSwap, 17);
        CHECK(count_kind(lora, EventKind::WarmupLoad) == 1);
        CHECK(count_kind(lora, EventKind::WeightLoad) == 100);
        CHECK(count_kind(lora, EventKind::Infer) == 100);
        CHECK(lora.events.size() == 201);
        CHECK_FALSE(lora.events[0].specialty.has_value());  // the base model
    }
    SECTION("strategies share inference draws, so run pairs differ by swap cost alone") {
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            auto full = run_default(Strategy::FullSwap, seed);
            auto lora = run_default(Strategy::LoraSwap, seed);
            double expected_gap =
                static_cast<double>(full.model_loads) * 5.0 - 100 * 0.90;
            CHECK(full.total_time_s - lora.total_time_s == Approx(expected_gap).margin(1e-9));
        }
    }
    SECTION("invalid configurations are rejected") {
        auto workload = generate_workload(10, 1);
        CHECK_THROWS_AS(run_simulation(Strategy::FullSwap, {}, TimingModel{}, 5, 1),
                        SimConfigError);
        CHECK_THROWS_AS(run_simulation(Strategy::FullSwap, workload, TimingModel{}, 0, 1),
                        SimConfigError);
        CHECK_THROWS_AS(run_simulation(Strategy::FullSwap, workload, TimingModel{}, 12, 1),
                        SimConfigError);
        TimingModel bad;
        bad.full_model_load_s = -1.0;
        CHECK_THROWS_AS(run_simulation(Strategy::FullSwap, workload, bad, 5, 1),
                        InvalidTimingError);
    }
    SECTION("an unregistered specialty fails a gated lora run") {
        AdapterRegistry fleet;  // empty
        SimOptions opts;
        opts.fleet = &fleet;
        auto workload = generate_workload(10, 1);
        CHECK_THROWS_AS(run_simulation(Strategy::LoraSwap, workload, TimingModel{}, 5, 1, opts),
                        UnknownSpecialtyError);
    }
}

TEST_CASE("warm-up accounting and the literal protocol reading") {
    SECTION("count_warmup adds exactly the warm-up loads") {
        auto base_full = run_default(Strategy::FullSwap, 11);
        SimOptions opts;
        opts.count_warmup = true;
        auto warm_full = run_default(Strategy::FullSwap, 11, opts);
        CHECK(warm_full.model_loads == base_full.model_loads + 5);
        CHECK(warm_full.total_time_s == Approx(base_full.total_time_s + 25.0).margin(1e-9));
        CHECK(warm_full.events.size() == base_full.events.size());

        auto base_lora = run_default(Strategy::LoraSwap, 11);
        auto warm_lora = run_default(Strategy::LoraSwap, 11, opts);
        CHECK(warm_lora.model_loads == base_lora.model_loads + 1);
        CHECK(warm_lora.total_time_s == Approx(base_lora.total_time_s + 5.0).margin(1e-9));
    }
    SECTION("literal protocol reloads a fresh model set per request") {
        SimOptions opts;
        opts.literal_protocol = true;
        auto workload = generate_workload(20, 3);
        auto literal = run_simulation(Strategy::FullSwap, workload, TimingModel{}, 5, 3, opts);
        auto normal = run_simulation(Strategy::FullSwap, workload, TimingModel{}, 5, 3);
        CHECK(literal.model_loads >= 100);  // 5 per request before any miss
        CHECK(literal.total_time_s >= 500.0);
        CHECK(normal.model_loads < 20);
        CHECK(count_kind(literal, EventKind::WarmupLoad) == 0);
    }
}

TEST_CASE("summaries reproduce the published benchmark shape") {
    // Reference runs: five totals and load counts per strategy.
    const std::vector<double> full_times = {630.25, 498.25, 584.51, 547.92, 490.98};
    const std::vector<double> full_loads = {63, 47, 60, 54, 47};
    const std::vector<double> lora_times = {312.62, 315.46, 337.39, 314.94, 298.78};

    std::vector<SimReport> reports;
    for (int i = 0; i < 5; ++i)
        reports.push_back(table_row(Strategy::FullSwap, i + 1, full_times[i],
                                    static_cast<long long>(full_loads[i]), 0));
    for (int i = 0; i < 5; ++i)
        reports.push_back(table_row(Strategy::LoraSwap, i + 1, lora_times[i], 0, 100));

    auto table = summarize(reports);
    REQUIRE(table.runs == 5);
    REQUIRE(table.rows.size() == 4);

    SECTION("row statistics match an independent recomputation") {
        CHECK(table.rows[0].metric == "total_time_s");
        CHECK(table.rows[0].mean == Approx(550.382));
        CHECK(table.rows[0].sd == Approx(oracle_sd(full_times)));
        CHECK(table.rows[1].metric == "model_loads");
        CHECK(table.rows[1].mean == Approx(54.2));
        CHECK(table.rows[1].sd == Approx(oracle_sd(full_loads)));
        CHECK(table.rows[2].strategy == Strategy::LoraSwap);
        CHECK(table.rows[2].mean == Approx(315.838));
        CHECK(table.rows[3].metric == "weight_loads");
        CHECK(table.rows[3].mean == 100.0);
        CHECK(table.rows[3].sd == 0.0);
    }
    SECTION("bench CSV lays runs out in columns") {
        std::ostringstream out;
        write_bench_csv(table, out);
        auto csv = out.str();
        CHECK(csv.find("strategy,metric,run_1,run_2,run_3,run_4,run_5,mean,sd\n") == 0);
        CHECK(csv.find("full,total_time_s,630.25,498.25,584.51,547.92,490.98,550.38," +
                       fixed2(oracle_sd(full_times)) + "\n") != std::string::npos);
        CHECK(csv.find("full,model_loads,63.00,47.00,60.00,54.00,47.00,54.20," +
                       fixed2(oracle_sd(full_loads)) + "\n") != std::string::npos);
        CHECK(csv.find("lora,total_time_s,312.62,315.46,337.39,314.94,298.78,315.84," +
                       fixed2(oracle_sd(lora_times)) + "\n") != std::string::npos);
        CHECK(csv.find("lora,weight_loads,100.00,100.00,100.00,100.00,100.00,100.00,0.00\n") !=
              std::string::npos);
    }
    SECTION("reports CSV carries one row per run") {
        std::ostringstream out;
        write_reports_csv(reports, out);
        auto csv = out.str();
        CHECK(csv.find("strategy,run,total_time_s,model_loads,weight_loads\n") == 0);
        CHECK(csv.find("full,1,630.25,63,0\n") != std::string::npos);
        CHECK(csv.find("lora,5,298.78,0,100\n") != std::string::npos);
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 11);
    }
    SECTION("a single report yields mean == value and sd == 0") {
        auto single = summarize({table_row(Strategy::FullSwap, 0, 495.0, 54, 0)});
        REQUIRE(single.rows.size() == 2);
        CHECK(single.runs == 1);
        CHECK(single.rows[0].mean == 495.0);
        CHECK(single.rows[0].sd == 0.0);
    }
    SECTION("summarize rejects an empty batch") {
        CHECK_THROWS_AS(summarize({}), SimConfigError);
    }
}

TEST_CASE("event logs serialize one JSON object per event") {
    TimingModel timing;
    timing.infer = InferDist::fixed(2.25);
    auto workload = generate_workload(1, 4);
    auto report = run_simulation(Strategy::LoraSwap, workload, timing, 5, 4);
    std::ostringstream out;
    write_events_jsonl(report, out);

    std::vector<std::string> lines;
    std::istringstream in(out.str());
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == R"({"seq":0,"specialty":null,"event":"warmup_load","duration_s":0.0})");
    auto code = std::string(to_code(workload[0].specialty));
    CHECK(lines[1] ==
          R"({"seq":1,"specialty":")" + code + R"(","event":"weight_load","duration_s":0.9})");
    CHECK(lines[2] ==
          R"({"seq":1,"specialty":")" + code + R"(","event":"infer","duration_s":2.25})");
}
