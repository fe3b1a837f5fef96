#include "qcreg/parallel.hpp"

#include <gtest/gtest.h>

#include <vector>

TEST(ParallelFor, EveryIndexOnce) {
    const unsigned saved = qcreg::max_threads();
    for (unsigned threads : {1u, 3u, 8u}) {
        qcreg::set_max_threads(threads);
        EXPECT_EQ(qcreg::max_threads(), threads);
        for (std::size_t n : {0u, 1u, 7u, 1000u}) {
            std::vector<int> hits(n, 0);
            qcreg::parallel_for(n, [&](std::size_t b, std::size_t e) {
                for (std::size_t i = b; i < e; ++i) ++hits[i];
            });
            for (int h : hits) EXPECT_EQ(h, 1);
        }
    }
    qcreg::set_max_threads(saved);
}
