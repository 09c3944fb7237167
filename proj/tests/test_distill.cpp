// SPDX-License-Identifier: Apache-2.0
//
// Two-stage QA distillation: prompt rendering against goldens, finding and
// question parsing, keyword filtering, the scripted pipeline, record/replay,
// and cost accounting.

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "medfleet/distill.hpp"
#include "support/oracles.hpp"

using namespace medfleet;
using Catch::Approx;

namespace {

const std::filesystem::path kGoldenDir = MEDFLEET_GOLDEN_DIR;

PaperRecord make_record(std::string pmid, std::string abstract,
                        SubSpecialty specialty = SubSpecialty::CAR) {
    PaperRecord r;
    r.pmid = std::move(pmid);
    r.journal = "Circulation";
    r.title = "t";
    r.abstract = std::move(abstract);
    r.pub_year = 2020;
    r.specialty = specialty;
    return r;
}

using Entry = ScriptedCompletionClient::Entry;

}  // namespace

TEST_CASE("prompt templates match the golden transcriptions byte for byte") {
    CHECK(std::string(kFindingSystemPrompt) == "You are a medical AI assistant.");
    CHECK(std::string(kQuestionSystemPrompt) == "You are a medical AI assistant.");
    CHECK(std::string(kFindingUserTemplate) ==
          testing::read_file(kGoldenDir / "finding_prompt.txt"));
    CHECK(std::string(kQuestionUserTemplate) ==
          testing::read_file(kGoldenDir / "question_prompt.txt"));
}

TEST_CASE("finding prompts embed the abstract and nothing else varies") {
    SECTION("the abstract lands at the placeholder") {
        auto p = render_finding_prompt("Aspirin lowers cardiovascular risk.");
        CHECK(p.system == kFindingSystemPrompt);
        CHECK(p.user.find("Refer only to the abstract of the given paper") != std::string::npos);
        CHECK(p.user.size() > std::string("Aspirin lowers cardiovascular risk.").size());
        CHECK(p.user.substr(p.user.size() - 35) == "Aspirin lowers cardiovascular risk.");
    }
    SECTION("two abstracts share the entire template prefix") {
        auto a = render_finding_prompt("AAAA.");
        auto b = render_finding_prompt("BBBB.");
        auto prefix_len = std::string(kFindingUserTemplate).find("{abstract}");
        REQUIRE(prefix_len != std::string::npos);
        CHECK(a.user.substr(0, prefix_len) == b.user.substr(0, prefix_len));
        CHECK(a.user.substr(prefix_len) == "AAAA.");
        CHECK(b.user.substr(prefix_len) == "BBBB.");
    }
    SECTION("blank abstracts are rejected") {
        CHECK_THROWS_AS(render_finding_prompt(""), EmptyAbstractError);
        CHECK_THROWS_AS(render_finding_prompt("  \n\t"), EmptyAbstractError);
    }
    SECTION("question prompts wrap the finding") {
        Finding f{"Aspirin inhibits COX-1", "1", 1};
        auto p = render_question_prompt(f);
        CHECK(p.system == kQuestionSystemPrompt);
        CHECK(p.user.find("[Finding]: Aspirin inhibits COX-1.") != std::string::npos);
        CHECK(p.user.find("most appropriate question") != std::string::npos);
    }
}

TEST_CASE("finding parsing strips numbering and renumbers positionally") {
    SECTION("numbered lines become findings") {
        auto fs = parse_findings("1. Aspirin inhibits COX-1.\n2. Statins lower LDL.", "77");
        REQUIRE(fs.size() == 2);
        CHECK(fs[0].text == "Aspirin inhibits COX-1.");
        CHECK(fs[0].index == 1);
        CHECK(fs[0].source_pmid == "77");
        CHECK(fs[1].text == "Statins lower LDL.");
        CHECK(fs[1].index == 2);
    }
    SECTION("prose around the list is ignored") {
        auto fs = parse_findings("Here are the findings:\n1. X occurs.\nHope this helps!", "1");
        REQUIRE(fs.size() == 1);
        CHECK(fs[0].text == "X occurs.");
    }
    SECTION("paren numbering and untrusted ordinals") {
        auto fs = parse_findings("7) Only one line.", "1");
        REQUIRE(fs.size() == 1);
        CHECK(fs[0].index == 1);  // positional, not the model's 7
    }
    SECTION("findings are truncated to their first sentence") {
        auto fs = parse_findings("1. First sentence. Second sentence.", "1");
        REQUIRE(fs.size() == 1);
        CHECK(fs[0].text == "First sentence.");
    }
    SECTION("a finding without terminal punctuation is kept verbatim") {
        auto fs = parse_findings("1. No terminal punctuation", "1");
        REQUIRE(fs.size() == 1);
        CHECK(fs[0].text == "No terminal punctuation");
    }
    SECTION("missing space after the number disqualifies the line") {
        CHECK_THROWS_AS(parse_findings("1.No space here.", "9"), NoFindingsError);
    }
    SECTION("no numbered lines at all") {
        try {
            parse_findings("No findings.", "42");
            FAIL("expected NoFindingsError");
        } catch (const NoFindingsError& e) {
            CHECK(e.pmid() == "42");
        }
    }
}

TEST_CASE("keyword filter drops meta-statements on whole-word matches") {
    KeywordFilter filter;
    SECTION("default keyword set") {
        CHECK(filter.keywords() ==
              std::vector<std::string>{"study", "paper", "result", "abstract", "author",
                                       "department"});
        CHECK(filter.mode() == KeywordFilter::Mode::WholeWord);
    }
    SECTION("whole-word hits and misses") {
        auto dropped = filter.check("The study enrolled 120 patients.");
        CHECK_FALSE(dropped.kept);
        CHECK(dropped.reason == "study");
        CHECK(filter.check("Aspirin reduces stroke risk in AF patients.").kept);
        // Plurals are different words: "Authors" passes, "paper" still hits.
        CHECK(filter.check("Authors disagree on the dose.").kept);
        auto paper = filter.check("Authors of this paper disagree.");
        CHECK_FALSE(paper.kept);
        CHECK(paper.reason == "paper");
        CHECK(filter.check("Case studies were excluded.").kept);
    }
    SECTION("matching is case-insensitive") {
        CHECK_FALSE(filter.check("THE RESULT WAS SIGNIFICANT.").kept);
        CHECK_FALSE(KeywordFilter({"STUDY"}).check("our study shows").kept);
    }
    SECTION("substring mode is stricter") {
        KeywordFilter sub({"author"}, KeywordFilter::Mode::Substring);
        CHECK_FALSE(sub.check("Authors disagree.").kept);
        CHECK_FALSE(sub.check("Coauthored reviews.").kept);
        CHECK(sub.check("No match here.").kept);
    }
    SECTION("filter_finding delegates to check") {
        Finding f{"The result was significant.", "1", 1};
        auto verdict = filter_finding(f, filter);
        CHECK_FALSE(verdict.kept);
        CHECK(verdict.reason == "result");
    }
}

TEST_CASE("question parsing accepts single interrogatives only") {
    auto q = parse_question("What enzyme does aspirin inhibit?");
    CHECK(q.kind == QuestionOutcome::Kind::Question);
    CHECK(q.question == "What enzyme does aspirin inhibit?");

    CHECK(parse_question("None").kind == QuestionOutcome::Kind::NotBiomedical);
    CHECK(parse_question(" none \n").kind == QuestionOutcome::Kind::NotBiomedical);

    auto multi = parse_question("Good question. What is LDL?");
    CHECK(multi.kind == QuestionOutcome::Kind::Rejected);
    CHECK(multi.reject == QuestionReject::MultiSentence);
    CHECK(std::string(to_string(multi.reject)) == "MultiSentence");

    auto statement = parse_question("This statement never asks anything.");
    CHECK(statement.kind == QuestionOutcome::Kind::Rejected);
    CHECK(statement.reject == QuestionReject::NotInterrogative);

    auto empty = parse_question("   ");
    CHECK(empty.kind == QuestionOutcome::Kind::Rejected);
    CHECK(empty.reject == QuestionReject::Empty);
}

TEST_CASE("scripted pipeline exercises every branch") {
    auto record = make_record("555", "irrelevant, the script answers.");

    SECTION("filter, sentinel, reject, and accept all leave their marks") {
        ScriptedCompletionClient client({
            {"1. Aspirin inhibits platelet aggregation.\n"
             "2. The result was significant.\n"
             "3. Statins lower LDL cholesterol.\n"
             "4. No patient relapsed during follow-up.\n"
             "5. Blood pressure fell by ten points.",
             {100, 50}},
            {"What does aspirin inhibit?", {20, 10}},   // finding 1
            {"None", {20, 1}},                          // finding 3
            {"Two sentences. What happened?", {20, 8}}, // finding 4
            {"How far did blood pressure fall?", {20, 9}},  // finding 5
        });
        auto result = distill_abstract(record, client);

        REQUIRE(result.pairs.size() == 2);
        CHECK(result.pairs[0].question == "What does aspirin inhibit?");
        CHECK(result.pairs[0].answer == "Aspirin inhibits platelet aggregation.");
        CHECK(result.pairs[0].specialty == SubSpecialty::CAR);
        CHECK(result.pairs[0].source_pmid == "555");
        CHECK(result.pairs[1].answer == "Blood pressure fell by ten points.");
        CHECK(result.finding_indices == std::vector<int>{1, 5});

        CHECK(result.trace.findings_total == 5);
        CHECK(result.trace.findings_kept == 2);
        REQUIRE(result.trace.drops.size() == 3);
        CHECK(result.trace.drops[0].stage == "filter");
        CHECK(result.trace.drops[0].reason == "result");
        CHECK(result.trace.drops[0].finding_index == 2);
        CHECK(result.trace.drops[1].stage == "question");
        CHECK(result.trace.drops[1].reason == "NotBiomedical");
        CHECK(result.trace.drops[2].reason == "MultiSentence");

        CHECK(result.trace.finding_usage == TokenUsage{100, 50});
        CHECK(result.trace.question_usage == TokenUsage{80, 28});
    }
    SECTION("a record without a specialty is refused") {
        auto bare = record;
        bare.specialty.reset();
        ScriptedCompletionClient client({});
        CHECK_THROWS_AS(distill_abstract(bare, client), DistillError);
    }
    SECTION("no findings: retries are bounded and the drop is recorded") {
        ScriptedCompletionClient client({{"nothing numbered", {10, 5}},
                                         {"still nothing", {10, 5}},
                                         {"spare entry", {10, 5}}});
        DistillConfig config;
        config.finding_attempts = 2;
        auto result = distill_abstract(record, client, config);
        CHECK(client.calls() == 2);
        CHECK(result.pairs.empty());
        REQUIRE(result.trace.drops.size() == 1);
        CHECK(result.trace.drops[0].stage == "findings");
        CHECK(result.trace.drops[0].reason == "NoFindings");
        CHECK(result.trace.drops[0].finding_index == std::nullopt);
        CHECK(result.trace.finding_usage == TokenUsage{20, 10});  // both attempts billed
    }
    SECTION("a successful attempt stops the retry loop") {
        ScriptedCompletionClient client({{"1. Clean finding here.", {10, 5}},
                                         {"What is the finding?", {10, 5}}});
        DistillConfig config;
        config.finding_attempts = 3;
        auto result = distill_abstract(record, client, config);
        CHECK(result.pairs.size() == 1);
        CHECK(client.calls() == 2);
    }
    SECTION("client failure carries pmid, finding index, and partial work") {
        ScriptedCompletionClient client({
            {"1. Aspirin helps patients.\n2. Statins help more.", {10, 5}},
            {"How does aspirin help?", {10, 5}},
            {"", {}, true},  // fails on the second question
        });
        try {
            distill_abstract(record, client);
            FAIL("expected DistillClientError");
        } catch (const DistillClientError& e) {
            CHECK(e.pmid() == "555");
            CHECK(e.finding_index() == 2);
            CHECK(e.partial().pairs.size() == 1);
            CHECK(e.partial().pairs[0].question == "How does aspirin help?");
            CHECK(std::string(e.what()).find("555") != std::string::npos);
        }
    }
}

TEST_CASE("corpus distillation is order-stable for any worker count") {
    std::vector<PaperRecord> records;
    records.push_back(make_record("9003", "Gut flora shifts with diet. Fiber feeds them.",
                                  SubSpecialty::GAS));
    records.push_back(make_record(
        "9001", "Aspirin lowers risk. Statins lower LDL. Exercise helps everyone.",
        SubSpecialty::CAR));
    records.push_back(make_record("9002", "Insulin regulates glucose levels in plasma.",
                                  SubSpecialty::MET));
    records.push_back(make_record("9004", "Antibiotics clear the infection quickly.",
                                  SubSpecialty::INF));

    HashMockCompletionClient mock;
    auto one = distill_corpus(records, mock, {}, 1);
    auto three = distill_corpus(records, mock, {}, 3);

    SECTION("serial and parallel runs agree byte for byte") {
        std::ostringstream a, b;
        write_qa_pairs(one.pairs, a);
        write_qa_pairs(three.pairs, b);
        CHECK(a.str() == b.str());
        CHECK(one.trace.findings_total == 7);  // one per sentence, no record dropped
        CHECK(one.trace.findings_total == three.trace.findings_total);
        CHECK(one.trace.findings_kept == three.trace.findings_kept);
        CHECK(one.trace.finding_usage == three.trace.finding_usage);
        CHECK(one.trace.drops.size() == three.trace.drops.size());
    }
    SECTION("pairs come out sorted by pmid then finding index") {
        for (std::size_t i = 1; i < one.pairs.size(); ++i) {
            auto prev = std::tie(one.pairs[i - 1].source_pmid, one.finding_indices[i - 1]);
            auto cur = std::tie(one.pairs[i].source_pmid, one.finding_indices[i]);
            CHECK(prev <= cur);
        }
        CHECK(one.pairs.front().source_pmid == "9001");
    }
    SECTION("record and replay reproduce the mock run exactly") {
        RecordingCompletionClient recorder(mock);
        auto recorded = distill_corpus(records, recorder, {}, 1);

        std::ostringstream trace_out;
        write_completion_trace(recorder.entries(), trace_out);
        std::istringstream trace_in(trace_out.str());
        auto entries = read_completion_trace(trace_in);
        REQUIRE(entries.size() == recorder.entries().size());

        ReplayCompletionClient replay(entries);
        auto replayed = distill_corpus(records, replay, {}, 1);

        std::ostringstream a, b;
        write_qa_pairs(recorded.pairs, a);
        write_qa_pairs(replayed.pairs, b);
        CHECK(a.str() == b.str());
        CHECK(recorded.trace.question_usage == replayed.trace.question_usage);
    }
    SECTION("replaying an unknown prompt fails loudly") {
        ReplayCompletionClient replay(std::vector<TraceEntry>{});
        CHECK_THROWS_AS(replay.complete(render_finding_prompt("Novel abstract.")),
                        CompletionError);
    }
}

TEST_CASE("completion traces round-trip and reject malformed rows") {
    std::vector<TraceEntry> entries{{prompt_key({"s", "u"}), "hello \"quoted\"", {12, 34}},
                                    {prompt_key({"s", "v"}), "line\ntwo", {5, 6}}};
    std::ostringstream out;
    write_completion_trace(entries, out);

    std::istringstream in(out.str());
    auto back = read_completion_trace(in);
    REQUIRE(back.size() == 2);
    CHECK(back[0].prompt_sha256 == entries[0].prompt_sha256);
    CHECK(back[0].text == "hello \"quoted\"");
    CHECK(back[0].usage == TokenUsage{12, 34});
    CHECK(back[1].text == "line\ntwo");

    SECTION("prompt keys are sha-256 hex and prompt-sensitive") {
        CHECK(entries[0].prompt_sha256.size() == 64);
        CHECK(entries[0].prompt_sha256 != entries[1].prompt_sha256);
        CHECK(prompt_key({"s", "u"}) == entries[0].prompt_sha256);
    }
    SECTION("unknown keys are rejected") {
        std::istringstream bad(R"({"prompt_sha256":"x","text":"t","prompt_tokens":1,)"
                               R"("completion_tokens":2,"extra":true})");
        CHECK_THROWS_AS(read_completion_trace(bad), SchemaError);
    }
    SECTION("missing keys are rejected") {
        std::istringstream bad(R"({"prompt_sha256":"x","prompt_tokens":1,"completion_tokens":2})");
        CHECK_THROWS_AS(read_completion_trace(bad), SchemaError);
    }
}

TEST_CASE("drop logs serialize with explicit null indices") {
    DistillTrace trace;
    trace.drops.push_back({"101", std::nullopt, "findings", "NoFindings"});
    trace.drops.push_back({"102", 3, "filter", "study"});
    std::ostringstream out;
    write_distill_trace(trace, out);
    CHECK(out.str() ==
          "{\"pmid\":\"101\",\"finding_index\":null,\"stage\":\"findings\","
          "\"reason\":\"NoFindings\"}\n"
          "{\"pmid\":\"102\",\"finding_index\":3,\"stage\":\"filter\",\"reason\":\"study\"}\n");
}

TEST_CASE("cost accounting prices both stages per thousand tokens") {
    SECTION("default prices") {
        auto report = compute_cost({300000, 200000}, {100000, 50000});
        CHECK(report.finding.cost == Approx(0.45 + 0.40));
        CHECK(report.question.cost == Approx(0.15 + 0.10));
        CHECK(report.total == Approx(1.10));
        CHECK(report.finding.usage == TokenUsage{300000, 200000});
    }
    SECTION("explicit prices") {
        auto report = compute_cost({1000, 1000}, {0, 0}, 1.0, 2.0);
        CHECK(report.finding.cost == Approx(3.0));
        CHECK(report.total == Approx(3.0));
    }
    SECTION("zero usage and zero prices") {
        CHECK(compute_cost({}, {}).total == 0.0);
        CHECK(compute_cost({500, 500}, {500, 500}, 0.0, 0.0).total == 0.0);
    }
    SECTION("negative prices are rejected") {
        CHECK_THROWS_AS(compute_cost({}, {}, -0.1, 0.002), NegativePriceError);
        CHECK_THROWS_AS(compute_cost({}, {}, 0.0015, -1.0), NegativePriceError);
    }
}
