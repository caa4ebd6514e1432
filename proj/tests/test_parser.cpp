#include <catch_amalgamated.hpp>

#include "tapp/parser.hpp"
#include "tapp/rng.hpp"

#include "testutil.hpp"

using namespace tapp;

TEST_CASE("case-study script parses into the expected structure") {
    auto parsed = parse_script(testutil::slurp(testutil::data_file("casestudy.tapp.yml")));
    REQUIRE(parsed.ok());
    const AppScript& script = parsed.value();
    REQUIRE(script.tags.size() == 3);
    CHECK(script.tags[0].first == "critical");
    CHECK(script.tags[1].first == "machine_learning");
    CHECK(script.tags[2].first == "default");

    const TagPolicy& critical = *script.find_tag("critical");
    REQUIRE(critical.blocks.size() == 1);
    const Block& cb = critical.blocks[0];
    REQUIRE(cb.controller);
    CHECK(cb.controller->label == "LocalCtl_1");
    CHECK(!cb.controller->tolerance); // omitted until canonicalized
    REQUIRE(cb.workers.size() == 1);
    CHECK(cb.workers[0].kind == WorkerClause::Kind::Set);
    CHECK(*cb.workers[0].label == "edge");
    CHECK(cb.strategy == Strategy::Random);
    CHECK(critical.followup == Followup::Fail);
    CHECK(!critical.block_strategy);

    const TagPolicy& ml = *script.find_tag("machine_learning");
    REQUIRE(ml.blocks.size() == 1);
    REQUIRE(ml.blocks[0].controller);
    CHECK(ml.blocks[0].controller->label == "CloudCtl");
    CHECK(ml.blocks[0].controller->tolerance == TopologyTolerance::Same);
    CHECK(ml.followup == Followup::Default);

    const TagPolicy& def = *script.find_tag("default");
    REQUIRE(def.blocks.size() == 2);
    CHECK(def.block_strategy == Strategy::Random);
    CHECK(!def.followup);
    REQUIRE(def.blocks[0].workers.size() == 2);
    CHECK(def.blocks[0].workers[0].kind == WorkerClause::Kind::Set);
    CHECK(*def.blocks[0].workers[0].label == "internal");
    CHECK(def.blocks[0].workers[0].strategy == Strategy::Random);
    CHECK(*def.blocks[0].workers[1].label == "cloud");
    CHECK(def.blocks[0].strategy == Strategy::BestFirst);
    CHECK(def.blocks[1].controller->label == "LocalCtl_2");
}

TEST_CASE("minimal script: one tag, one named worker") {
    auto parsed = parse_script("t:\n - workers:\n    - w1\n");
    REQUIRE(parsed.ok());
    const AppScript& s = parsed.value();
    REQUIRE(s.tags.size() == 1);
    CHECK(s.tags[0].first == "t");
    REQUIRE(s.tags[0].second.blocks.size() == 1);
    const Block& b = s.tags[0].second.blocks[0];
    CHECK(!b.controller);
    REQUIRE(b.workers.size() == 1);
    CHECK(b.workers[0].kind == WorkerClause::Kind::Named);
    CHECK(*b.workers[0].label == "w1");
    CHECK(!b.strategy);
    CHECK(!s.tags[0].second.followup);

    AppScript canon = canonicalize(s);
    CHECK(canon.tags[0].second.blocks[0].strategy == Strategy::BestFirst);
    CHECK(canon.tags[0].second.followup == Followup::Default);
}

TEST_CASE("empty workers list is a parse error") {
    auto parsed = parse_script("t:\n - workers: []\n");
    REQUIRE(!parsed.ok());
    CHECK(parsed.error().loc.line == 2);
    CHECK(parsed.error().message.find("must not be empty") != std::string::npos);
}

TEST_CASE("parse errors carry locations") {
    struct Case {
        const char* src;
        int line;
        ParseError::Kind kind;
    };
    const Case cases[] = {
        {"t:\n - workers:\n    - w1\nt:\n - workers:\n    - w2\n", 4, ParseError::Kind::Semantic},
        {"t:\n - workers:\n    - w1\n   strategy: bestest\n", 4, ParseError::Kind::BadValue},
        {"t:\n - workers:\n    - w1\n   invalidate: capacity_used: 150%\n", 4, ParseError::Kind::BadValue},
        {"t:\n - workers:\n    - w1\n   frequency: high\n", 4, ParseError::Kind::UnknownKeyword},
        {"t:\n - topology_tolerance: all\n   workers:\n    - w1\n", 2, ParseError::Kind::Semantic},
        {"t:\n followup: fail\n", 2, ParseError::Kind::Syntax},
    };
    for (const Case& c : cases) {
        auto parsed = parse_script(c.src);
        REQUIRE(!parsed.ok());
        CHECK(parsed.error().loc.line == c.line);
        CHECK(parsed.error().kind == c.kind);
    }
}

TEST_CASE("set options attach to the set, not the block") {
    auto parsed = parse_script(
        "t:\n"
        "  - workers:\n"
        "      - *local\n"
        "        strategy: random\n"
        "        invalidate: capacity_used: 50%\n"
        "      - w9\n"
        "    invalidate: overload\n");
    REQUIRE(parsed.ok());
    const Block& b = parsed.value().tags[0].second.blocks[0];
    REQUIRE(b.workers.size() == 2);
    CHECK(b.workers[0].strategy == Strategy::Random);
    REQUIRE(b.workers[0].invalidate);
    CHECK(b.workers[0].invalidate->kind == InvalidateRule::Kind::CapacityUsed);
    CHECK(b.workers[0].invalidate->value == 50);
    CHECK(!b.workers[1].strategy);
    REQUIRE(b.invalidate);
    CHECK(b.invalidate->kind == InvalidateRule::Kind::Overload);
}

TEST_CASE("options on a named worker are rejected") {
    auto parsed = parse_script("t:\n - workers:\n    - w1\n      strategy: random\n");
    REQUIRE(!parsed.ok());
    CHECK(parsed.error().loc.line == 4);
    CHECK(parsed.error().message.find("only allowed on `*`") != std::string::npos);
}

TEST_CASE("canonicalize fills defaults and inherits set options") {
    auto parsed = parse_script(
        "t:\n"
        "  - controller: C1\n"
        "    workers:\n"
        "      - *a\n"
        "      - *b\n"
        "        strategy: platform\n"
        "    strategy: random\n"
        "    invalidate: max_concurrent_invocations: 3\n");
    REQUIRE(parsed.ok());
    AppScript canon = canonicalize(parsed.value());
    const TagPolicy& tag = canon.tags[0].second;
    CHECK(tag.block_strategy == Strategy::BestFirst);
    CHECK(tag.followup == Followup::Default);
    const Block& b = tag.blocks[0];
    CHECK(b.controller->tolerance == TopologyTolerance::All);
    // omitted set options inherit the block's
    CHECK(b.workers[0].strategy == Strategy::Random);
    REQUIRE(b.workers[0].invalidate);
    CHECK(b.workers[0].invalidate->kind == InvalidateRule::Kind::MaxConcurrentInvocations);
    // explicit set options stay put
    CHECK(b.workers[1].strategy == Strategy::Platform);

    SECTION("idempotent") { CHECK(canonicalize(canon) == canon); }
    SECTION("explicit values are never changed") {
        CHECK(b.strategy == Strategy::Random);
        CHECK(b.invalidate->value == 3);
    }
}

TEST_CASE("round-trip: render then parse reproduces the AST") {
    // includes the shipped case-study script
    auto fig = parse_script(testutil::slurp(testutil::data_file("casestudy.tapp.yml")));
    REQUIRE(fig.ok());
    auto fig2 = parse_script(render_script(fig.value()));
    REQUIRE(fig2.ok());
    CHECK(fig.value() == fig2.value());

    Rng rng(2024);
    for (int i = 0; i < 200; ++i) {
        AppScript script = testutil::gen_script(rng);
        std::string text = render_script(script);
        auto reparsed = parse_script(text);
        REQUIRE(reparsed.ok());
        if (!(reparsed.value() == script)) {
            INFO(text);
            REQUIRE(reparsed.value() == script);
        }
        // canonical ASTs round-trip too
        AppScript canon = canonicalize(script);
        auto recanon = parse_script(render_script(canon));
        REQUIRE(recanon.ok());
        CHECK(recanon.value() == canon);
    }
}

TEST_CASE("parse is total: random byte soup never crashes") {
    Rng rng(7);
    const char alphabet[] = "abc:*-%# \n\t[]0123_";
    for (int i = 0; i < 500; ++i) {
        std::string s;
        std::size_t len = rng.below(120);
        for (std::size_t j = 0; j < len; ++j) s += alphabet[rng.below(sizeof(alphabet) - 1)];
        auto parsed = parse_script(s); // must return either AST or located error
        if (!parsed.ok()) {
            CHECK(parsed.error().loc.line >= 0);
        }
    }
}
