#include "stitch/datakit.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "stitch/image_io.hpp"
#include "stitch/rng.hpp"

namespace fs = std::filesystem;

namespace stitch {

namespace {

double sample_bilinear(const Tensor4& img, int c, double x, double y) {
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0, fy = y - y0;
    auto tap = [&](int yy, int xx) -> double {
        if (xx < 0 || yy < 0 || xx >= img.shape.w || yy >= img.shape.h) return 0.0;
        return img.at(0, c, yy, xx);
    };
    return (1 - fy) * ((1 - fx) * tap(y0, x0) + fx * tap(y0, x0 + 1)) +
           fy * ((1 - fx) * tap(y0 + 1, x0) + fx * tap(y0 + 1, x0 + 1));
}

nlohmann::json record_to_json(const PairRecord& r) {
    nlohmann::json j;
    j["id"] = r.id;
    j["ref_path"] = r.ref_path;
    j["target_path"] = r.target_path;
    if (r.truth_offsets) {
        nlohmann::json o = nlohmann::json::array();
        for (const auto& v : r.truth_offsets->d) o.push_back({v.x, v.y});
        j["truth_offsets"] = o;
    }
    if (r.overlap_level) j["overlap_level"] = *r.overlap_level;
    if (r.parallax_level) j["parallax_level"] = *r.parallax_level;
    return j;
}

PairRecord record_from_json(const nlohmann::json& j) {
    PairRecord r;
    r.id = j.at("id");
    r.ref_path = j.at("ref_path");
    r.target_path = j.at("target_path");
    if (j.contains("truth_offsets")) {
        FourPointOffsets o;
        const auto& arr = j["truth_offsets"];
        if (arr.size() != 4) throw DataError("manifest: truth_offsets needs 4 corners");
        for (int k = 0; k < 4; ++k) o.d[k] = {arr[k][0], arr[k][1]};
        r.truth_offsets = o;
    }
    if (j.contains("overlap_level")) r.overlap_level = j["overlap_level"].get<std::string>();
    if (j.contains("parallax_level")) r.parallax_level = j["parallax_level"].get<std::string>();
    return r;
}

}  // namespace

PairRecord gen_synthetic_pair(const Tensor4& source, const SynthParams& params,
                              std::uint64_t seed, const std::string& out_dir,
                              const std::string& id) {
    if (params.disturbance < 0.0)
        throw std::invalid_argument("gen_synthetic_pair: negative disturbance");
    const int crop = params.crop_size;
    const int margin = static_cast<int>(std::ceil(params.disturbance)) + 1;
    if (source.shape.w < crop + 2 * margin || source.shape.h < crop + 2 * margin)
        throw DataError("gen_synthetic_pair: source smaller than crop + disturbance margin");

    const int ox = (source.shape.w - crop) / 2;
    const int oy = (source.shape.h - crop) / 2;

    Tensor4 ref(1, source.shape.c, crop, crop);
    for (int c = 0; c < source.shape.c; ++c)
        for (int y = 0; y < crop; ++y)
            for (int x = 0; x < crop; ++x)
                ref.at(0, c, y, x) = source.at(0, c, oy + y, ox + x);

    Rng rng(seed, 0x53594E5448ULL /* "SYNTH" */);
    FourPointOffsets truth;
    for (auto& v : truth.d) {
        v.x = rng.uniform(-params.disturbance, params.disturbance);
        v.y = rng.uniform(-params.disturbance, params.disturbance);
    }

    // h maps target coords into the reference crop, so warping the target by
    // h reproduces the reference; render target(q) = source(crop_origin + h(q))
    const Homography h = solve_dlt(truth, crop, crop);
    Tensor4 target(1, source.shape.c, crop, crop);
    if (params.disturbance == 0.0) {
        target = ref;  // keep the zero-perturbation case bit-exact
    } else {
        for (int y = 0; y < crop; ++y)
            for (int x = 0; x < crop; ++x) {
                const Vec2 p = warp_point(h, {static_cast<double>(x), static_cast<double>(y)});
                for (int c = 0; c < source.shape.c; ++c)
                    target.at(0, c, y, x) = sample_bilinear(source, c, ox + p.x, oy + p.y);
            }
    }
    if (params.photometric_jitter) {
        Rng jit(seed, 0x4A49545445ULL /* "JITTE" */);
        const double gain = jit.uniform(0.8, 1.2);
        const double bias = jit.uniform(-0.1, 0.1);
        for (double& v : target.data) v = std::clamp(gain * v + bias, 0.0, 1.0);
    }

    fs::create_directories(out_dir);
    PairRecord r;
    r.id = id;
    r.ref_path = id + "_ref.png";
    r.target_path = id + "_target.png";
    r.truth_offsets = truth;
    io::save_png(ref, (fs::path(out_dir) / r.ref_path).string());
    io::save_png(target, (fs::path(out_dir) / r.target_path).string());
    return r;
}

DatasetManifest gen_synthetic_dataset(const Tensor4& source, int n,
                                      const SynthParams& params, std::uint64_t seed,
                                      const std::string& out_dir) {
    if (n < 0) throw std::invalid_argument("gen_synthetic_dataset: negative count");
    DatasetManifest m;
    m.seed = seed;
    m.params = params;
    for (int k = 0; k < n; ++k) {
        std::ostringstream id;
        id << "pair_" << std::setw(4) << std::setfill('0') << k;
        // stream-split the seed so records are independent of each other
        m.records.push_back(gen_synthetic_pair(
            source, params, Rng(seed, 0x5245434F5244ULL + k).next_u64(), out_dir, id.str()));
    }
    m.save((fs::path(out_dir) / "manifest.json").string());
    return m;
}

std::string DatasetManifest::to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["params"] = {{"disturbance", params.disturbance},
                   {"crop_size", params.crop_size},
                   {"photometric_jitter", params.photometric_jitter}};
    j["records"] = nlohmann::json::array();
    for (const auto& r : records) j["records"].push_back(record_to_json(r));
    return j.dump(2);
}

DatasetManifest DatasetManifest::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("manifest: parse failure: ") + e.what());
    }
    DatasetManifest m;
    m.seed = j.value("seed", 0ULL);
    if (j.contains("params")) {
        m.params.disturbance = j["params"].value("disturbance", 32.0);
        m.params.crop_size = j["params"].value("crop_size", 128);
        m.params.photometric_jitter = j["params"].value("photometric_jitter", false);
    }
    for (const auto& rj : j.value("records", nlohmann::json::array()))
        m.records.push_back(record_from_json(rj));
    for (std::size_t i = 0; i < m.records.size(); ++i)
        for (std::size_t k = i + 1; k < m.records.size(); ++k)
            if (m.records[i].id == m.records[k].id)
                throw DataError("manifest: duplicate record id " + m.records[i].id);
    return m;
}

void DatasetManifest::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("manifest: cannot write " + path);
    out << to_json() << "\n";
}

DatasetManifest DatasetManifest::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("manifest: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

std::vector<DecodedPair> load_dataset(const std::string& manifest_path) {
    const DatasetManifest m = DatasetManifest::load(manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();
    std::vector<DecodedPair> out;
    out.reserve(m.records.size());
    for (const auto& r : m.records) {
        auto resolve = [&](const std::string& p) {
            return fs::path(p).is_absolute() ? p : (base / p).string();
        };
        const std::string rp = resolve(r.ref_path), tp = resolve(r.target_path);
        if (!fs::exists(rp) || !fs::exists(tp))
            throw DataError("load_dataset: missing image for record " + r.id);
        DecodedPair d{r, {}, {}};
        try {
            d.ref = io::load_image(rp);
            d.target = io::load_image(tp);
        } catch (const DataError& e) {
            throw DataError("load_dataset: record " + r.id + ": " + e.what());
        }
        if (d.ref.shape != d.target.shape)
            throw DataError("load_dataset: size mismatch in record " + r.id);
        out.push_back(std::move(d));
    }
    return out;
}

DatasetManifest scan_real_pairs(const std::string& root_dir) {
    const fs::path ref_dir = fs::path(root_dir) / "reference";
    const fs::path tgt_dir = fs::path(root_dir) / "target";
    if (!fs::is_directory(ref_dir) || !fs::is_directory(tgt_dir))
        throw DataError("scan_real_pairs: expected reference/ and target/ under " + root_dir);
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(ref_dir))
        if (e.is_regular_file()) names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    DatasetManifest m;
    for (const auto& name : names) {
        if (!fs::exists(tgt_dir / name))
            throw DataError("scan_real_pairs: no target counterpart for " + name);
        PairRecord r;
        r.id = fs::path(name).stem().string();
        r.ref_path = (ref_dir / name).string();
        r.target_path = (tgt_dir / name).string();
        m.records.push_back(std::move(r));
    }
    return m;
}

void save_image(const Tensor4& image, const std::string& path) {
    io::save_png(image, path);
}

}  // namespace stitch
