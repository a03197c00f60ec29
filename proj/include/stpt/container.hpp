#ifndef STPT_CONTAINER_HPP_
#define STPT_CONTAINER_HPP_

#include <string>
#include <vector>

#include <json.hpp>

#include "stpt/tensor.hpp"

namespace stpt {

/// On-disk tensor container: one JSON header line
/// {"dims":[...],"dtype":"f64","order":"n-innermost","role":"P|A|V|B|G", ...}
/// followed by raw little-endian 64-bit floats. Extra header keys carry
/// format-specific metadata (sample_rate, hop, window, freq_map, ...).
struct TensorFile {
    std::vector<int> dims;
    std::string role;
    nlohmann::json header;       // full header object
    std::vector<double> data;    // dims-product values
};

void save_tensor(const std::string& path, const std::vector<int>& dims,
                 const double* data, const std::string& role,
                 const nlohmann::json& extra = nlohmann::json::object());

TensorFile load_tensor(const std::string& path);

void save_activity(const std::string& path, const Tensor3& A, const std::string& role = "A");
Tensor3 load_activity(const std::string& path);

void save_spectrogram(const std::string& path, const Spectrogram& V);
Spectrogram load_spectrogram(const std::string& path);

/// Dictionary container (role "P") plus a JSON sidecar "<path>.json"
/// holding pitch_map and frontend metadata.
void save_dictionary(const std::string& path, const PatternDictionary& P,
                     const nlohmann::json& extra_sidecar = nlohmann::json::object());
PatternDictionary load_dictionary(const std::string& path);

}  // namespace stpt

#endif  // STPT_CONTAINER_HPP_
