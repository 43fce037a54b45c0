#include "lfcap/data.hpp"

#include <algorithm>
#include <iostream>

#include "lfcap/lf_io.hpp"

namespace fs = std::filesystem;

namespace lfcap {

std::vector<DatasetEntry> ingest_dataset(const fs::path& root)
{
    if (!fs::is_directory(root))
        throw IoError("dataset root " + root.string() + " is not a directory");

    std::vector<fs::path> candidates;
    for (const auto& entry : fs::directory_iterator(root)) {
        const auto& p = entry.path();
        if (entry.is_directory() && fs::exists(p / "manifest.json"))
            candidates.push_back(p);
        else if (entry.is_regular_file() && p.extension() == ".lf")
            candidates.push_back(p);
    }
    std::sort(candidates.begin(), candidates.end());

    std::vector<DatasetEntry> out;
    if (candidates.empty()) {
        std::cerr << "warning: dataset " << root.string() << " contains no light fields\n";
        return out;
    }
    for (const auto& p : candidates) {
        LightField lf = read_lf(p);
        if (!out.empty()) {
            const auto& ref = out.front().lf.shape();
            const auto& s = lf.shape();
            if (s.M != ref.M || s.N != ref.N || s.C != ref.C)
                throw ValidationError("dataset entry " + p.filename().string() + " is " +
                                      to_string(s) + " but " + out.front().name + " is " +
                                      to_string(ref) +
                                      "; angular dimensions and channels must agree");
        }
        out.push_back({p.filename().string(), std::move(lf)});
    }
    return out;
}

} // namespace lfcap
