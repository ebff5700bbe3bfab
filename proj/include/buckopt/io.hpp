#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "buckopt/core.hpp"

namespace buckopt {

inline constexpr const char* kVersion = "0.1.0";

// 6 significant digits (reports) / round-trip exact (logs, replay comparison)
std::string fmt6(double v);
std::string fmt17(double v);

// write-then-rename; directories created as needed
void write_text_atomic(const std::filesystem::path& path, const std::string& content);
void write_bytes_atomic(const std::filesystem::path& path, const void* data, size_t size);

// density field: flat binary of n^3 little-endian float64 in x-fastest order,
// plus a text sidecar <path>.hdr carrying n
void write_density(const std::filesystem::path& path, const VoxelGrid& grid,
                   const VectorXd& rho);
VectorXd read_density(const std::filesystem::path& path, int& n_out);

// legacy-format VTK on the uniform voxel grid: density as CELL_DATA; the
// optional Bloch mode is expanded to the (n+1)^3 point lattice with the
// boundary phases applied, real and imaginary parts as separate vector arrays
void write_vtk(const std::filesystem::path& path, const VoxelGrid& grid, const VectorXd& rho,
               const VectorXcd* mode = nullptr, const Vec3* mode_k = nullptr);

// CSV: ',' separator, '.' decimal, mandatory header
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// flat "key = value" text; '#' starts a comment; keys unique
class KeyValueFile {
  public:
    static KeyValueFile parse(const std::string& text, const std::string& origin);
    static KeyValueFile load(const std::filesystem::path& path);

    bool has(const std::string& key) const;
    std::string str(const std::string& key) const;
    std::string str(const std::string& key, const std::string& dflt) const;
    double num(const std::string& key) const;
    double num(const std::string& key, double dflt) const;
    int integer(const std::string& key) const;
    int integer(const std::string& key, int dflt) const;
    bool flag(const std::string& key, bool dflt) const;

    // keys present in the file but never queried (config typo guard)
    std::vector<std::string> unconsumed() const;
    const std::string& text() const { return text_; }

  private:
    std::string origin_, text_;
    std::map<std::string, std::string> kv_;
    mutable std::map<std::string, bool> used_;
};

uint64_t fnv1a(const std::string& s);

// manifest: key-value text with config hash, version, timings
void write_manifest(const std::filesystem::path& path,
                    const std::vector<std::pair<std::string, std::string>>& entries);

}  // namespace buckopt
