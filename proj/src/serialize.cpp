#include "sdan/serialize.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace sdan {

namespace {

void put_u32le(std::string& buf, std::uint32_t v) {
    buf.push_back(static_cast<char>(v & 0xff));
    buf.push_back(static_cast<char>((v >> 8) & 0xff));
    buf.push_back(static_cast<char>((v >> 16) & 0xff));
    buf.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t get_u32le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void save_tensor(const std::string& path, const Tensor& t) {
    std::string header = "SDTN";
    header.push_back(0x01);
    put_u32le(header, 4);
    put_u32le(header, static_cast<std::uint32_t>(t.n));
    put_u32le(header, static_cast<std::uint32_t>(t.c));
    put_u32le(header, static_cast<std::uint32_t>(t.h));
    put_u32le(header, static_cast<std::uint32_t>(t.w));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for write: " + path);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    std::vector<char> payload(t.data.size() * 4);
    for (size_t i = 0; i < t.data.size(); ++i) {
        std::uint32_t bits;
        std::memcpy(&bits, &t.data[i], 4);
        payload[4 * i + 0] = static_cast<char>(bits & 0xff);
        payload[4 * i + 1] = static_cast<char>((bits >> 8) & 0xff);
        payload[4 * i + 2] = static_cast<char>((bits >> 16) & 0xff);
        payload[4 * i + 3] = static_cast<char>((bits >> 24) & 0xff);
    }
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw IoError("write failed: " + path);
}

Tensor load_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    unsigned char header[25];
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    if (!in || std::memcmp(header, "SDTN", 4) != 0)
        throw IoError("not an SDTN tensor dump: " + path);
    if (header[4] != 0x01) throw IoError("unsupported SDTN version in " + path);
    if (get_u32le(header + 5) != 4) throw IoError("SDTN ndim must be 4: " + path);
    int n = static_cast<int>(get_u32le(header + 9));
    int c = static_cast<int>(get_u32le(header + 13));
    int h = static_cast<int>(get_u32le(header + 17));
    int w = static_cast<int>(get_u32le(header + 21));

    Tensor t(n, c, h, w);
    std::vector<unsigned char> payload(t.numel() * 4);
    in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (!in) throw IoError("truncated SDTN payload: " + path);
    for (size_t i = 0; i < t.numel(); ++i) {
        std::uint32_t bits = get_u32le(payload.data() + 4 * i);
        std::memcpy(&t.data[i], &bits, 4);
    }
    return t;
}

}  // namespace sdan
