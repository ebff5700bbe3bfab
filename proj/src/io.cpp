#include "buckopt/io.hpp"

#include <bit>
#include <cinttypes>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace buckopt {

namespace fs = std::filesystem;

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_bytes_atomic(const fs::path& path, const void* data, size_t size) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
        f.write(static_cast<const char*>(data), std::streamsize(size));
        if (!f) throw IoError("short write to " + tmp.string());
    }
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("rename " + tmp.string() + " -> " + path.string() + ": " + ec.message());
}

void write_text_atomic(const fs::path& path, const std::string& content) {
    write_bytes_atomic(path, content.data(), content.size());
}

namespace {

uint64_t to_le(double v) {
    uint64_t u = std::bit_cast<uint64_t>(v);
    if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap64(u);
    return u;
}
double from_le(uint64_t u) {
    if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap64(u);
    return std::bit_cast<double>(u);
}

}  // namespace

void write_density(const fs::path& path, const VoxelGrid& grid, const VectorXd& rho) {
    if (rho.size() != grid.nelem()) throw IoError("density size does not match grid");
    std::vector<uint64_t> raw(rho.size());
    for (int i = 0; i < rho.size(); i++) raw[i] = to_le(rho(i));
    write_bytes_atomic(path, raw.data(), raw.size() * 8);
    std::ostringstream hdr;
    hdr << "n = " << grid.n << "\n"
        << "count = " << grid.nelem() << "\n"
        << "dtype = float64le\n"
        << "order = x-fastest\n";
    write_text_atomic(fs::path(path) += ".hdr", hdr.str());
}

VectorXd read_density(const fs::path& path, int& n_out) {
    KeyValueFile hdr = KeyValueFile::load(fs::path(path) += ".hdr");
    int n = hdr.integer("n");
    VoxelGrid grid(n);
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    std::vector<uint64_t> raw(grid.nelem());
    f.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size() * 8));
    if (size_t(f.gcount()) != raw.size() * 8)
        throw IoError(path.string() + ": expected " + std::to_string(raw.size() * 8) +
                      " bytes, got " + std::to_string(f.gcount()) + " (byte offset " +
                      std::to_string(f.gcount()) + ")");
    char extra;
    if (f.read(&extra, 1); f.gcount() != 0)
        throw IoError(path.string() + ": trailing bytes beyond " +
                      std::to_string(raw.size() * 8));
    VectorXd rho(grid.nelem());
    for (int i = 0; i < rho.size(); i++) rho(i) = from_le(raw[i]);
    n_out = n;
    return rho;
}

void write_vtk(const fs::path& path, const VoxelGrid& grid, const VectorXd& rho,
               const VectorXcd* mode, const Vec3* mode_k) {
    if (rho.size() != grid.nelem()) throw IoError("density size does not match grid");
    const int n = grid.n;
    std::ostringstream out;
    out << "# vtk DataFile Version 3.0\n"
        << "microstructure\n"
        << "ASCII\n"
        << "DATASET STRUCTURED_POINTS\n"
        << "DIMENSIONS " << n + 1 << " " << n + 1 << " " << n + 1 << "\n"
        << "ORIGIN 0 0 0\n"
        << "SPACING " << fmt17(grid.h()) << " " << fmt17(grid.h()) << " " << fmt17(grid.h())
        << "\n";
    out << "CELL_DATA " << grid.nelem() << "\n"
        << "SCALARS density double 1\nLOOKUP_TABLE default\n";
    for (int e = 0; e < grid.nelem(); e++) out << fmt17(rho(e)) << "\n";
    if (mode) {
        if (mode->size() != grid.ndof()) throw IoError("mode size does not match grid");
        Vec3 k = mode_k ? *mode_k : Vec3::Zero();
        const int np = n + 1;
        out << "POINT_DATA " << np * np * np << "\n";
        for (int part = 0; part < 2; part++) {
            out << "VECTORS mode_" << (part == 0 ? "re" : "im") << " double\n";
            for (int kk = 0; kk < np; kk++)
                for (int jj = 0; jj < np; jj++)
                    for (int ii = 0; ii < np; ii++) {
                        double arg = k(0) * (ii == n) + k(1) * (jj == n) + k(2) * (kk == n);
                        std::complex<double> ph(std::cos(arg), std::sin(arg));
                        int node = grid.lin(ii == n ? 0 : ii, jj == n ? 0 : jj, kk == n ? 0 : kk);
                        for (int d = 0; d < 3; d++) {
                            std::complex<double> v = ph * (*mode)(3 * node + d);
                            out << fmt17(part == 0 ? v.real() : v.imag())
                                << (d == 2 ? "\n" : " ");
                        }
                    }
        }
    }
    write_text_atomic(path, out.str());
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ostringstream out;
    for (size_t i = 0; i < header.size(); i++) out << header[i] << (i + 1 < header.size() ? "," : "");
    out << "\n";
    for (const auto& r : rows) {
        if (r.size() != header.size()) throw IoError("CSV row width does not match header");
        for (size_t i = 0; i < r.size(); i++) out << r[i] << (i + 1 < r.size() ? "," : "");
        out << "\n";
    }
    write_text_atomic(path, out.str());
}

KeyValueFile KeyValueFile::parse(const std::string& text, const std::string& origin) {
    KeyValueFile out;
    out.origin_ = origin;
    out.text_ = text;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        lineno++;
        if (size_t h = line.find('#'); h != std::string::npos) line.erase(h);
        auto trim = [](std::string s) {
            size_t a = s.find_first_not_of(" \t\r");
            size_t b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        if (trim(line).empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        if (!out.kv_.emplace(key, val).second)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key " + key);
    }
    return out;
}

KeyValueFile KeyValueFile::load(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse(ss.str(), path.string());
}

bool KeyValueFile::has(const std::string& key) const {
    used_[key] = true;
    return kv_.count(key) > 0;
}

std::string KeyValueFile::str(const std::string& key) const {
    used_[key] = true;
    auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError(origin_ + ": missing required key " + key);
    return it->second;
}

std::string KeyValueFile::str(const std::string& key, const std::string& dflt) const {
    used_[key] = true;
    auto it = kv_.find(key);
    return it == kv_.end() ? dflt : it->second;
}

double KeyValueFile::num(const std::string& key) const {
    std::string v = str(key);
    try {
        size_t pos = 0;
        double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError(origin_ + ": key " + key + ": not a number: '" + v + "'");
    }
}

double KeyValueFile::num(const std::string& key, double dflt) const {
    return has(key) ? num(key) : dflt;
}

int KeyValueFile::integer(const std::string& key) const {
    double v = num(key);
    int i = int(v);
    if (double(i) != v) throw ConfigError(origin_ + ": key " + key + ": not an integer");
    return i;
}

int KeyValueFile::integer(const std::string& key, int dflt) const {
    return has(key) ? integer(key) : dflt;
}

bool KeyValueFile::flag(const std::string& key, bool dflt) const {
    if (!has(key)) return dflt;
    std::string v = str(key);
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    throw ConfigError(origin_ + ": key " + key + ": not a boolean: '" + v + "'");
}

std::vector<std::string> KeyValueFile::unconsumed() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : kv_)
        if (!used_.count(k)) out.push_back(k);
    return out;
}

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void write_manifest(const fs::path& path,
                    const std::vector<std::pair<std::string, std::string>>& entries) {
    std::ostringstream out;
    for (const auto& [k, v] : entries) out << k << " = " << v << "\n";
    write_text_atomic(path, out.str());
}

}  // namespace buckopt
