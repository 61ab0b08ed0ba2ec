#include "fpimpute/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>

namespace fpimpute::nn {

namespace {

constexpr std::array<char, 8> kMagic = {'F', 'P', 'M', 'L', 'P', '\0', '\0', '\0'};

template <typename T>
void write_raw(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw DataError("checkpoint is truncated");
    return v;
}

}  // namespace

namespace io {
void write_u32(std::ostream& out, std::uint32_t v) { write_raw(out, v); }
void write_u64(std::ostream& out, std::uint64_t v) { write_raw(out, v); }
void write_f64(std::ostream& out, double v) { write_raw(out, v); }
void write_string(std::ostream& out, const std::string& s) {
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::uint32_t read_u32(std::istream& in) { return read_raw<std::uint32_t>(in); }
std::uint64_t read_u64(std::istream& in) { return read_raw<std::uint64_t>(in); }
double read_f64(std::istream& in) { return read_raw<double>(in); }
std::string read_string(std::istream& in) {
    const auto n = read_u64(in);
    if (n > (1u << 30)) throw DataError("checkpoint string length is implausible");
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (!in) throw DataError("checkpoint is truncated");
    return s;
}
}  // namespace io

void write_mlp(std::ostream& out, const Mlp& net) {
    out.write(kMagic.data(), kMagic.size());
    io::write_u32(out, kMlpFormatVersion);
    const auto& sizes = net.layer_sizes();
    io::write_u32(out, static_cast<std::uint32_t>(sizes.size()));
    for (int s : sizes) write_raw<std::int32_t>(out, s);
    for (const auto& l : net.layers()) write_raw<std::uint8_t>(out, l.activation == Activation::Tanh ? 1 : 0);
    for (const auto& l : net.layers())
        for (Eigen::Index i = 0; i < l.weight.rows(); ++i)
            for (Eigen::Index j = 0; j < l.weight.cols(); ++j) io::write_f64(out, l.weight(i, j));
    for (const auto& l : net.layers())
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) io::write_f64(out, l.bias(i));
}

Mlp read_mlp(std::istream& in) {
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) throw DataError("not a network checkpoint (bad magic)");
    const auto version = io::read_u32(in);
    if (version != kMlpFormatVersion)
        throw DataError("unsupported network checkpoint version " + std::to_string(version));
    const auto n = io::read_u32(in);
    if (n < 2 || n > 64) throw DataError("checkpoint has an invalid layer count");
    std::vector<int> sizes(n);
    for (auto& s : sizes) s = read_raw<std::int32_t>(in);
    std::vector<Activation> acts(n - 1);
    for (auto& a : acts) a = read_raw<std::uint8_t>(in) ? Activation::Tanh : Activation::Identity;
    Mlp net(sizes, acts);
    for (auto& l : net.layers())
        for (Eigen::Index i = 0; i < l.weight.rows(); ++i)
            for (Eigen::Index j = 0; j < l.weight.cols(); ++j) l.weight(i, j) = io::read_f64(in);
    for (auto& l : net.layers())
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = io::read_f64(in);
    return net;
}

void save_mlp(const std::filesystem::path& path, const Mlp& net) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    write_mlp(out, net);
}

Mlp load_mlp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    return read_mlp(in);
}

}  // namespace fpimpute::nn
