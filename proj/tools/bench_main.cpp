// Timing comparison between the OpenMP kernels and their serial reference
// implementations, over a synthetic workload. The two variants must produce
// identical results; this binary asserts that too, so a mismatch fails loudly
// rather than reporting a meaningless speedup.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mascots/borf.hpp"
#include "mascots/engine.hpp"
#include "mascots/evaluation.hpp"
#include "mascots/models.hpp"
#include "mascots/synth.hpp"

using namespace mascots;

namespace {

double time_ms(const std::function<void()>& fn) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    const auto stop = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(stop - start).count();
}

void report(const char* name, double serial_ms, double parallel_ms, bool identical) {
    std::printf("%-22s %10.1f ms %10.1f ms %8.2fx   %s\n", name, serial_ms, parallel_ms,
                serial_ms / parallel_ms, identical ? "identical" : "MISMATCH");
    if (!identical) std::exit(1);
}

bool same_counts(const BorfMatrix& a, const BorfMatrix& b) {
    if (a.rows.size() != b.rows.size()) return false;
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        if (a.rows[i].counts != b.rows[i].counts) return false;
    }
    return true;
}

bool same_results(const std::vector<CounterfactualResult>& a,
                  const std::vector<CounterfactualResult>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].counterfactual.values() != b[i].counterfactual.values()) return false;
        if (a[i].valid != b[i].valid || a[i].iterations != b[i].iterations) return false;
    }
    return true;
}

bool same_forest(const IsolationForest& a, const IsolationForest& b,
                 const std::vector<TimeSeries>& probes) {
    for (const auto& p : probes) {
        if (a.score(p) != b.score(p)) return false;
    }
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    const int n = argc > 1 ? std::atoi(argv[1]) : 120;
    const int length = argc > 2 ? std::atoi(argv[2]) : 256;

#ifdef _OPENMP
    std::printf("workload: %d instances of length %d, %d thread(s)\n\n", n, length,
                omp_get_max_threads());
#else
    std::printf("workload: %d instances of length %d, OpenMP disabled\n\n", n, length);
#endif
    std::printf("%-22s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

    const Dataset data = make_cbf(n, length, 7);
    const auto transform = BorfTransform::build(auto_configure(1, length), 1);

    BorfMatrix counts_serial, counts_parallel;
    const double t1s = time_ms([&] { counts_serial = transform_dataset_serial(data, transform); });
    const double t1p = time_ms([&] { counts_parallel = transform_dataset(data, transform); });
    report("transform_dataset", t1s, t1p, same_counts(counts_serial, counts_parallel));

    const Knn1BlackBox knn = Knn1BlackBox::fit(data);
    std::vector<int> pred_serial, pred_parallel;
    const double t2s = time_ms([&] { pred_serial = knn.predict_batch_serial(data.instances); });
    const double t2p = time_ms([&] { pred_parallel = knn.predict_batch(data.instances); });
    report("predict_batch", t2s, t2p, pred_serial == pred_parallel);

    IsolationForest forest_serial, forest_parallel;
    const double t3s = time_ms([&] { forest_serial = iforest_fit_serial(data, 200, 256, 11); });
    const double t3p = time_ms([&] { forest_parallel = iforest_fit(data, 200, 256, 11); });
    report("iforest_fit", t3s, t3p,
           same_forest(forest_serial, forest_parallel, data.instances));

    std::vector<std::vector<double>> targets;
    for (const auto& ts : data.instances) targets.push_back(knn.predict_proba(ts));
    const Surrogate surrogate = surrogate_fit(counts_serial, targets, {});
    const auto presence = column_presence(counts_serial);
    EngineConfig config;
    config.max_iterations = 10;
    const std::vector<TimeSeries> queries(data.instances.begin(),
                                          data.instances.begin() + std::min(n, 24));
    std::vector<CounterfactualResult> explain_serial, explain_parallel;
    const double t4s = time_ms([&] {
        explain_serial = explain_batch_serial(queries, knn, surrogate, transform, presence, config);
    });
    const double t4p = time_ms([&] {
        explain_parallel = explain_batch(queries, knn, surrogate, transform, presence, config);
    });
    report("explain_batch", t4s, t4p, same_results(explain_serial, explain_parallel));

    return 0;
}
