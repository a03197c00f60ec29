#include "stpt/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace stpt {

namespace {

static_assert(sizeof(double) == 8, "container format requires 64-bit doubles");

// Raw payload is little-endian; byteswap on big-endian hosts.
void to_le(std::vector<double>& v) {
    if constexpr (std::endian::native == std::endian::big) {
        for (auto& x : v) {
            uint64_t u;
            std::memcpy(&u, &x, 8);
            u = __builtin_bswap64(u);
            std::memcpy(&x, &u, 8);
        }
    }
}

size_t dims_product(const std::vector<int>& dims) {
    size_t n = 1;
    for (int d : dims) {
        if (d < 0) throw std::invalid_argument("tensor container: negative dimension");
        n *= size_t(d);
    }
    return n;
}

}  // namespace

void save_tensor(const std::string& path, const std::vector<int>& dims,
                 const double* data, const std::string& role,
                 const nlohmann::json& extra) {
    nlohmann::json header = extra;
    header["dims"] = dims;
    header["dtype"] = "f64";
    header["order"] = "n-innermost";
    header["role"] = role;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << header.dump() << "\n";

    std::vector<double> payload(data, data + dims_product(dims));
    to_le(payload);
    out.write(reinterpret_cast<const char*>(payload.data()),
              std::streamsize(payload.size() * 8));
    if (!out) throw std::runtime_error("write failed: " + path);
}

TensorFile load_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("tensor container: missing header: " + path);

    TensorFile f;
    try {
        f.header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("tensor container: bad header in " + path + ": " + e.what());
    }
    if (f.header.value("dtype", "") != "f64")
        throw std::runtime_error("tensor container: unsupported dtype in " + path);
    f.dims = f.header.at("dims").get<std::vector<int>>();
    f.role = f.header.value("role", "");

    f.data.resize(dims_product(f.dims));
    in.read(reinterpret_cast<char*>(f.data.data()), std::streamsize(f.data.size() * 8));
    if (size_t(in.gcount()) != f.data.size() * 8)
        throw std::runtime_error("tensor container: truncated payload in " + path);
    to_le(f.data);
    return f;
}

void save_activity(const std::string& path, const Tensor3& A, const std::string& role) {
    save_tensor(path, {A.d0(), A.d1(), A.d2()}, A.data(), role);
}

Tensor3 load_activity(const std::string& path) {
    TensorFile f = load_tensor(path);
    if (f.dims.size() != 3)
        throw std::runtime_error("activity container: expected 3 dims in " + path);
    Tensor3 A(f.dims[0], f.dims[1], f.dims[2]);
    std::memcpy(A.data(), f.data.data(), f.data.size() * 8);
    return A;
}

void save_spectrogram(const std::string& path, const Spectrogram& V) {
    nlohmann::json extra = {
        {"sample_rate", V.sample_rate},
        {"hop", V.hop},
        {"window", V.window},
        {"freq_map", V.freq_map},
    };
    save_tensor(path, {V.data.rows(), V.data.cols()}, V.data.data(), "V", extra);
}

Spectrogram load_spectrogram(const std::string& path) {
    TensorFile f = load_tensor(path);
    if (f.dims.size() != 2)
        throw std::runtime_error("spectrogram container: expected 2 dims in " + path);
    Spectrogram V;
    V.data = Mat(f.dims[0], f.dims[1]);
    std::memcpy(V.data.data(), f.data.data(), f.data.size() * 8);
    V.sample_rate = f.header.value("sample_rate", 0.0);
    V.hop = f.header.value("hop", 0);
    V.window = f.header.value("window", 0);
    if (f.header.contains("freq_map"))
        V.freq_map = f.header["freq_map"].get<std::vector<double>>();
    return V;
}

void save_dictionary(const std::string& path, const PatternDictionary& P,
                     const nlohmann::json& extra_sidecar) {
    save_tensor(path, {P.data.d0(), P.data.d1(), P.data.d2()}, P.data.data(), "P");
    nlohmann::json sidecar = extra_sidecar;
    sidecar["pitch_map"] = P.pitch_map;
    sidecar["sample_rate"] = P.sample_rate;
    sidecar["hop"] = P.hop;
    sidecar["window"] = P.window;
    std::ofstream out(path + ".json");
    if (!out) throw std::runtime_error("cannot open for writing: " + path + ".json");
    out << sidecar.dump(2) << "\n";
}

PatternDictionary load_dictionary(const std::string& path) {
    TensorFile f = load_tensor(path);
    if (f.dims.size() != 3)
        throw std::runtime_error("dictionary container: expected 3 dims in " + path);
    PatternDictionary P;
    P.data = Tensor3(f.dims[0], f.dims[1], f.dims[2]);
    std::memcpy(P.data.data(), f.data.data(), f.data.size() * 8);

    std::ifstream side(path + ".json");
    if (!side) throw std::runtime_error("missing dictionary sidecar: " + path + ".json");
    nlohmann::json sidecar = nlohmann::json::parse(side);
    P.pitch_map = sidecar.at("pitch_map").get<std::vector<int>>();
    P.sample_rate = sidecar.value("sample_rate", 0.0);
    P.hop = sidecar.value("hop", 0);
    P.window = sidecar.value("window", 0);
    P.validate();
    return P;
}

}  // namespace stpt
