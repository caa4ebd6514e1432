#include <algorithm>
#include <numeric>
#include <set>

#include <catch_amalgamated.hpp>

#include "tapp/scheduler.hpp"

using namespace tapp;

TEST_CASE("single worker is its own preference list") {
    std::vector<std::string> one = {"w"};
    CHECK(coprime_fallback("fn", one) == one);
}

TEST_CASE("co-prime order is a permutation for every (hash, step)") {
    // exhaustive over n = 1..50, every start index and every valid step
    for (std::size_t n = 1; n <= 50; ++n) {
        std::vector<std::size_t> steps = coprime_steps(n);
        if (n == 1) {
            CHECK(steps.empty());
            steps = {1};
        }
        for (std::size_t s : steps) CHECK(std::gcd(s, n) == 1);
        for (std::size_t h = 0; h < n; ++h) {
            for (std::size_t s : steps) {
                std::vector<std::size_t> order = coprime_order(h, s, n);
                REQUIRE(order.size() == n);
                CHECK(order[0] == h % n);
                std::set<std::size_t> seen(order.begin(), order.end());
                CHECK(seen.size() == n); // visits every index exactly once
            }
        }
    }
}

TEST_CASE("fallback ordering is a permutation and deterministic") {
    std::vector<std::string> workers;
    for (int i = 0; i < 7; ++i) workers.push_back("w" + std::to_string(i));
    auto a = coprime_fallback("myFunction", workers, 123);
    auto b = coprime_fallback("myFunction", workers, 123);
    CHECK(a == b);
    std::set<std::string> seen(a.begin(), a.end());
    CHECK(seen.size() == workers.size());
    // a different salt (redeployment) generally reorders
    auto c = coprime_fallback("myFunction", workers, 456);
    std::set<std::string> seen_c(c.begin(), c.end());
    CHECK(seen_c.size() == workers.size());
}

TEST_CASE("same function hashes to the same primary worker") {
    std::vector<std::string> workers = {"a", "b", "c", "d", "e"};
    auto first = coprime_fallback("f1", workers, 9);
    for (int i = 0; i < 10; ++i) CHECK(coprime_fallback("f1", workers, 9)[0] == first[0]);
}
