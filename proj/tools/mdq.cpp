// mdq: encode, decode, sweep and metrics front end.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mdq/mdq.hpp"

namespace {

struct TrainOverrides {
    std::string config;
    std::optional<double> alpha, lambda, lambda1, lambda2;
    std::optional<std::size_t> iters, levels, descriptions;
    std::optional<std::uint64_t> seed;

    void add_to(CLI::App* cmd, bool with_rd_point) {
        cmd->add_option("--config", config, "key = value config file");
        if (with_rd_point) {
            cmd->add_option("--alpha", alpha, "side distortion weight in [0, 1]");
            cmd->add_option("--lambda", lambda, "rate weight for both descriptions");
            cmd->add_option("--lambda1", lambda1, "rate weight of description 1");
            cmd->add_option("--lambda2", lambda2, "rate weight of description 2");
            cmd->add_option("--descriptions", descriptions, "2 (default) or 1 for the single-description baseline");
        }
        cmd->add_option("--iters", iters, "training iterations");
        cmd->add_option("--levels", levels, "latent pyramid levels");
        cmd->add_option("--seed", seed, "random seed");
    }

    mdq::TrainConfig resolve() const {
        mdq::TrainConfig cfg = config.empty() ? mdq::TrainConfig{} : mdq::load_config(config);
        if (alpha) cfg.alpha = *alpha;
        if (lambda) cfg.lambda1 = cfg.lambda2 = *lambda;
        if (lambda1) cfg.lambda1 = *lambda1;
        if (lambda2) cfg.lambda2 = *lambda2;
        if (iters) cfg.iterations = *iters;
        if (levels) cfg.levels = *levels;
        if (descriptions) cfg.descriptions = *descriptions;
        if (seed) cfg.seed = *seed;
        cfg.validate();
        return cfg;
    }
};

std::vector<double> parse_grid(const std::string& s) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const auto comma = s.find(',', pos);
        const std::string item = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        if (!item.empty()) out.push_back(std::stod(item));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

void print_report(const std::vector<mdq::RdReport>& rows) {
    for (const auto& r : rows)
        std::printf("%-8s %8.4f bpp  %7.3f dB  MS-SSIM %.5f\n", r.scenario.c_str(), r.bpp, r.psnr_db, r.ms_ssim);
    if (rows.size() == 3) std::printf("side mean %7.3f dB\n", rows[0].side_mean_psnr_db);
}

int run_encode(const std::string& image_path, const TrainOverrides& o, const std::string& out, bool verbose) {
    const mdq::Image image = mdq::read_image(image_path);
    const mdq::TrainConfig cfg = o.resolve();
    std::function<void(const mdq::TrainProgress&)> progress;
    if (verbose)
        progress = [&](const mdq::TrainProgress& p) {
            if ((p.iteration + 1) % 500 == 0 || p.iteration == 0)
                std::fprintf(stderr, "iter %6zu  loss %.6g  D0 %.6g  D1 %.6g  D2 %.6g  R1 %.1f b  R2 %.1f b\n",
                             p.iteration + 1, p.terms.loss.item(), p.terms.d[0], p.terms.d[1], p.terms.d[2],
                             p.terms.rate_bits[0], p.terms.rate_bits[1]);
        };
    const mdq::EncodeResult res = mdq::encode_image(image, cfg, progress);
    for (const auto& d : res.descriptions)
        mdq::write_file(out + ".mdq" + std::to_string(d.header.description_id), mdq::to_bytes(d));
    const std::string csv = mdq::to_csv(res.reports);
    mdq::write_file(out + ".csv", std::span(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));
    print_report(res.reports);
    return 0;
}

int run_decode(const std::string& in1, const std::string& in2, const std::string& out, const std::string& ref) {
    std::vector<mdq::DecodedDescription> received;
    std::size_t bytes = 0;
    for (const auto& path : {in1, in2}) {
        if (path.empty()) continue;
        const auto data = mdq::read_file(path);
        bytes += data.size();
        received.push_back(mdq::read_description(data));
    }
    const auto decoded = mdq::decode_image(received);
    mdq::write_image(out, decoded.image);
    const auto& h = received[0].header;
    std::printf("mode %s  %.4f bpp", mdq::mode_name(decoded.mode), mdq::bits_per_pixel(bytes, h.width, h.height));
    if (!ref.empty()) {
        const auto r = mdq::measure(mdq::mode_name(decoded.mode), mdq::read_image(ref), decoded.image, bytes);
        std::printf("  %.3f dB  MS-SSIM %.5f", r.psnr_db, r.ms_ssim);
    }
    std::printf("\n");
    return 0;
}

int run_sweep(const std::string& image_path, const TrainOverrides& o, const std::string& lambdas,
              const std::string& alphas, const std::string& out_csv) {
    const mdq::Image image = mdq::read_image(image_path);
    const auto rows = mdq::sweep(image, parse_grid(lambdas), parse_grid(alphas), o.resolve());
    const std::string csv = mdq::to_csv(rows);
    mdq::write_file(out_csv, std::span(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));
    std::cout << csv;
    return 0;
}

int run_metrics(const std::string& ref, const std::string& test) {
    const mdq::Image a = mdq::read_image(ref), b = mdq::read_image(test);
    std::printf("psnr %.6f dB\nms_ssim %.6f\n", mdq::psnr(a, b), mdq::ms_ssim(a, b));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-description overfitted image codec"};
    app.require_subcommand(1);

    std::string image, out, in1, in2, ref, test, lambdas, alphas, out_csv;
    bool verbose = false;
    TrainOverrides enc_opts, sweep_opts;

    auto* enc = app.add_subcommand("encode", "train on one image and write <out>.mdq1/.mdq2 and <out>.csv");
    enc->add_option("--image", image, "PPM/PGM or PNG input")->required();
    enc->add_option("--out", out, "output prefix")->required();
    enc->add_flag("-v,--verbose", verbose, "print training progress");
    enc_opts.add_to(enc, true);

    auto* dec = app.add_subcommand("decode", "reconstruct from one or two descriptions");
    dec->add_option("--in1", in1, "first description")->required();
    dec->add_option("--in2", in2, "second description");
    dec->add_option("--out", out, "output image (.png or .ppm/.pgm)")->required();
    dec->add_option("--ref", ref, "reference image for PSNR/MS-SSIM");

    auto* sw = app.add_subcommand("sweep", "one encode per (lambda, alpha) pair");
    sw->add_option("--image", image, "PPM/PGM or PNG input")->required();
    sw->add_option("--lambdas", lambdas, "comma-separated lambda values")->required();
    sw->add_option("--alphas", alphas, "comma-separated alpha values")->required();
    sw->add_option("--out-csv", out_csv, "CSV output")->required();
    sweep_opts.add_to(sw, false);

    auto* met = app.add_subcommand("metrics", "PSNR and MS-SSIM between two images");
    met->add_option("--ref", ref, "reference image")->required();
    met->add_option("--test", test, "test image")->required();

    CLI11_PARSE(app, argc, argv);
    try {
        if (*enc) return run_encode(image, enc_opts, out, verbose);
        if (*dec) return run_decode(in1, in2, out, ref);
        if (*sw) return run_sweep(image, sweep_opts, lambdas, alphas, out_csv);
        if (*met) return run_metrics(ref, test);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "mdq: %s\n", e.what());
        return 1;
    }
    return 0;
}
