#include "distreal/lut.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "distreal/mac_model.hpp"

namespace distreal {

namespace {

constexpr char kMagic[4] = {'D', 'L', 'U', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<char*>(b), 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<char*>(b), 8);
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("lut: truncated file");
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

std::uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw std::runtime_error("lut: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return v;
}

}  // namespace

void ParetoLUT::validate() const {
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].d.size() != vector_length())
            throw std::invalid_argument("lut: inconsistent vector lengths");
        if (i > 0 && !(entries[i - 1].expected_fwd_macs < entries[i].expected_fwd_macs))
            throw std::invalid_argument("lut: entries not strictly ascending in MACs");
    }
}

const LutEntry& lookup(const ParetoLUT& lut, double per_batch_mac_budget,
                       double training_factor, bool* fell_back) {
    if (lut.entries.empty()) throw std::logic_error("lut: lookup on empty table");
    if (per_batch_mac_budget < 0) throw std::invalid_argument("lut: negative budget");

    // Largest index whose training MACs fit the budget (tiny relative slack
    // tolerates round-off in budget arithmetic).
    const double limit = per_batch_mac_budget * (1.0 + 1e-12);
    int lo = 0, hi = static_cast<int>(lut.entries.size()) - 1, best = -1;
    while (lo <= hi) {
        const int mid = (lo + hi) / 2;
        if (training_macs(lut.entries[static_cast<std::size_t>(mid)].expected_fwd_macs,
                          training_factor) <= limit) {
            best = mid;
            lo = mid + 1;
        } else {
            hi = mid - 1;
        }
    }
    if (best < 0) {
        if (fell_back) *fell_back = true;
        return lut.entries.front();
    }
    if (fell_back) *fell_back = false;
    return lut.entries[static_cast<std::size_t>(best)];
}

void save_lut(const ParetoLUT& lut, const std::string& path) {
    lut.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("lut: cannot write " + path);
    os.write(kMagic, 4);
    write_u32(os, kVersion);
    write_u32(os, static_cast<std::uint32_t>(lut.vector_length()));
    write_u32(os, static_cast<std::uint32_t>(lut.entries.size()));
    write_u64(os, lut.fingerprint);
    for (const auto& e : lut.entries) {
        for (double r : e.d) {
            float f = static_cast<float>(r);
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            write_u32(os, bits);
        }
        std::uint64_t bits;
        std::memcpy(&bits, &e.expected_fwd_macs, 8);
        write_u64(os, bits);
    }
}

ParetoLUT load_lut(const std::string& path, const NetworkSpec* expect) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("lut: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("lut: bad magic in " + path);
    const std::uint32_t version = read_u32(is);
    if (version != kVersion)
        throw std::runtime_error("lut: unsupported version " + std::to_string(version));
    const std::uint32_t veclen = read_u32(is);
    const std::uint32_t count = read_u32(is);
    ParetoLUT lut;
    lut.fingerprint = read_u64(is);
    if (expect && lut.fingerprint != expect->fingerprint())
        throw std::runtime_error("lut: fingerprint mismatch against the active network spec");
    lut.entries.resize(count);
    for (auto& e : lut.entries) {
        e.d.resize(veclen);
        for (auto& r : e.d) {
            const std::uint32_t bits = read_u32(is);
            float f;
            std::memcpy(&f, &bits, 4);
            r = static_cast<double>(f);
        }
        const std::uint64_t bits = read_u64(is);
        std::memcpy(&e.expected_fwd_macs, &bits, 8);
    }
    lut.validate();
    return lut;
}

void export_lut_csv(const ParetoLUT& lut, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("lut: cannot write " + path);
    os << "#schema lut 1\n";
    os << "expected_fwd_macs";
    for (std::size_t i = 0; i < lut.vector_length(); ++i) os << ",d" << i;
    os << "\n";
    char buf[64];
    for (const auto& e : lut.entries) {
        std::snprintf(buf, sizeof buf, "%.17g", e.expected_fwd_macs);
        os << buf;
        for (double r : e.d) {
            std::snprintf(buf, sizeof buf, "%.9g", r);
            os << "," << buf;
        }
        os << "\n";
    }
}

}  // namespace distreal
