// Writes the bundled synthetic datasets as CSV files.
#include "fpimpute/synthetic.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Write the synthetic benchmark datasets as CSV", "fpimpute_datagen"};
    std::string out_dir = "data";
    long rows = 600;
    std::uint64_t seed = 0;
    app.add_option("--out", out_dir, "Output directory")->capture_default_str();
    app.add_option("--rows", rows, "Rows per dataset")->capture_default_str()->check(CLI::Range(2L, 10'000'000L));
    app.add_option("--seed", seed, "Generator seed")->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    try {
        std::filesystem::create_directories(out_dir);
        for (const auto& name : fpimpute::synthetic::names()) {
            const auto data = fpimpute::synthetic::make(name, rows, seed);
            const auto path = std::filesystem::path(out_dir) / (name + ".csv");
            fpimpute::write_csv(path, data.header(), data.values);
            bool coded = false;
            for (const auto& f : data.schema) coded = coded || f.kind != fpimpute::FeatureKind::Continuous;
            if (coded) {
                std::ofstream schema(std::filesystem::path(out_dir) / (name + ".schema"));
                for (const auto& f : data.schema) {
                    if (f.kind == fpimpute::FeatureKind::Continuous) continue;
                    schema << f.name << " = " << fpimpute::to_string(f.kind) << ':';
                    for (std::size_t i = 0; i < f.labels.size(); ++i) schema << (i ? "," : "") << f.labels[i];
                    schema << '\n';
                }
            }
            std::cout << path.string() << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
