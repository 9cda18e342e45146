#include "support/e2e.hpp"

#include <doctest.h>

TEST_CASE("end to end: 50 assets, 20 notifications, 10 reviews") {
    const auto o = e2e::run(50, 20, 10);
    REQUIRE(o.error.empty());
    CHECK(o.total_pairs > 40);
    CHECK(o.first_drafts == o.total_pairs);
    CHECK(o.reviewed == 10);
    CHECK(o.exported >= 40);
    CHECK(o.file_entries == o.exported);
    CHECK(o.second_drafts == 0);
    CHECK(o.seconds < 60.0);
}
