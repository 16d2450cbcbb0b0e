#pragma once

// End-to-end encoding (train, quantize parameters, write descriptions),
// rate-distortion reports and the CSV format of the sweep tool.

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mdq/bitstream.hpp"
#include "mdq/metrics.hpp"
#include "mdq/param_quant.hpp"
#include "mdq/training.hpp"

namespace mdq {

struct RdReport {
    std::string scenario; // central, side1 or side2
    double bpp = 0.0;
    double psnr_db = 0.0;
    double ms_ssim = 0.0;
    // PSNR of the mean side MSE; the same on every row of one encode.
    double side_mean_psnr_db = 0.0;
    double alpha = 0.0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double wall_time_s = 0.0;
};

struct EncodeResult {
    TrainedModel model;
    StepSearchResult search;
    std::vector<LatentPyramid> latents; // quantized, per description
    std::vector<Description> descriptions;
    // Unclamped synthesis outputs: {central, side1, side2}, or {side1} alone.
    std::vector<Image> reconstructions;
    std::vector<RdReport> reports;
    // Per description: ARM codelength estimate and actual coded bits of the latents.
    std::vector<double> latent_bits_estimate;
    std::vector<double> latent_bits_coded;
};

inline double bits_per_pixel(std::size_t bytes, std::size_t width, std::size_t height) {
    return 8.0 * static_cast<double>(bytes) / static_cast<double>(width * height);
}

// Metrics are measured on the exported 8-bit reconstruction.
inline RdReport measure(const std::string& scenario, const Image& reference, const Image& reconstruction,
                        std::size_t bytes) {
    const Image exported = to_8bit_grid(reconstruction);
    RdReport r;
    r.scenario = scenario;
    r.bpp = bits_per_pixel(bytes, reference.width, reference.height);
    r.psnr_db = psnr(reference, exported);
    r.ms_ssim = ms_ssim(reference, exported);
    return r;
}

inline EncodeResult encode_image(const Image& image, const TrainConfig& cfg,
                                 const std::function<void(const TrainProgress&)>& on_iteration = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    EncodeResult res;
    res.model = train(image, cfg, on_iteration);
    res.search = search_steps(res.model, image, cfg);

    const std::size_t n_desc = res.model.description_count();
    const StreamMeta meta{image.width, image.height, image.channels, cfg.context_count};
    for (std::size_t j = 1; j <= n_desc; ++j) {
        res.latents.push_back(res.model.quantized_pyramid(static_cast<int>(j)));
        res.descriptions.push_back(write_description(res.search.params, res.latents.back(), meta));
        const ArmParams psi = res.search.params.arm(j - 1, cfg.context_count);
        res.latent_bits_estimate.push_back(rate_pyramid(psi, res.latents.back(), res.model.context, false));
        std::size_t coded = 0;
        for (const auto& p : res.descriptions.back().latent_payloads) coded += p.size();
        res.latent_bits_coded.push_back(8.0 * static_cast<double>(coded));
    }

    const SynthesisParams theta = res.search.params.synthesis(res.model.level_count(), image.channels);
    if (n_desc == 2)
        res.reconstructions.push_back(
            synthesize(theta, interleave(res.latents[0], res.latents[1]).as_pyramid().levels, image.height, image.width));
    for (const auto& p : res.latents) res.reconstructions.push_back(synthesize(theta, p.levels, image.height, image.width));

    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::vector<std::size_t> sizes;
    for (const auto& d : res.descriptions) sizes.push_back(d.size_bytes());
    if (n_desc == 2) {
        res.reports.push_back(measure("central", image, res.reconstructions[0], sizes[0] + sizes[1]));
        res.reports.push_back(measure("side1", image, res.reconstructions[1], sizes[0]));
        res.reports.push_back(measure("side2", image, res.reconstructions[2], sizes[1]));
        const double mean_side = 0.5 * (distortion(image, to_8bit_grid(res.reconstructions[1])) +
                                        distortion(image, to_8bit_grid(res.reconstructions[2])));
        for (auto& r : res.reports) r.side_mean_psnr_db = psnr_from_mse(mean_side);
    } else {
        res.reports.push_back(measure("side1", image, res.reconstructions[0], sizes[0]));
        res.reports.back().side_mean_psnr_db = res.reports.back().psnr_db;
    }
    for (auto& r : res.reports) {
        r.alpha = cfg.alpha;
        r.lambda1 = cfg.lambda1;
        r.lambda2 = cfg.lambda2;
        r.wall_time_s = seconds;
    }
    return res;
}

inline const char* kCsvHeader = "scenario,bpp,psnr_db,ms_ssim,side_mean_psnr_db,alpha,lambda1,lambda2,wall_time_s";

inline std::string to_csv(const std::vector<RdReport>& rows) {
    std::ostringstream os;
    os.precision(17);
    os << kCsvHeader << '\n';
    for (const auto& r : rows)
        os << r.scenario << ',' << r.bpp << ',' << r.psnr_db << ',' << r.ms_ssim << ',' << r.side_mean_psnr_db << ','
           << r.alpha << ',' << r.lambda1 << ',' << r.lambda2 << ',' << r.wall_time_s << '\n';
    return os.str();
}

inline std::vector<RdReport> parse_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    require(std::getline(is, line) && line == kCsvHeader, Errc::invalid_argument, "unexpected CSV header");
    std::vector<RdReport> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::vector<std::string> f;
        for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
        require(f.size() == 9, Errc::invalid_argument, "CSV row with " + std::to_string(f.size()) + " fields");
        RdReport r;
        r.scenario = f[0];
        double* fields[] = {&r.bpp, &r.psnr_db, &r.ms_ssim, &r.side_mean_psnr_db, &r.alpha, &r.lambda1, &r.lambda2, &r.wall_time_s};
        for (std::size_t i = 0; i < 8; ++i) *fields[i] = std::stod(f[i + 1]);
        rows.push_back(std::move(r));
    }
    return rows;
}

// Worker count: MDQ_THREADS if set, else the hardware concurrency.
inline std::size_t worker_count() {
    if (const char* env = std::getenv("MDQ_THREADS")) {
        const long n = std::strtol(env, nullptr, 10);
        if (n > 0) return static_cast<std::size_t>(n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// One encode per (lambda, alpha) pair, lambda-major. Both lambdas take the
// grid value. Rows come back in grid order whatever the completion order.
inline std::vector<RdReport> sweep(const Image& image, const std::vector<double>& lambdas,
                                   const std::vector<double>& alphas, const TrainConfig& base,
                                   std::size_t threads = worker_count()) {
    require(!lambdas.empty() && !alphas.empty(), Errc::invalid_argument, "sweep grid is empty");
    const std::size_t points = lambdas.size() * alphas.size();
    std::vector<std::vector<RdReport>> results(points);
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (std::size_t i; (i = next++) < points;) {
            try {
                TrainConfig cfg = base;
                cfg.lambda1 = cfg.lambda2 = lambdas[i / alphas.size()];
                cfg.alpha = alphas[i % alphas.size()];
                results[i] = encode_image(image, cfg).reports;
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(threads, points); ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
    std::vector<RdReport> rows;
    for (auto& r : results) rows.insert(rows.end(), r.begin(), r.end());
    return rows;
}

} // namespace mdq
