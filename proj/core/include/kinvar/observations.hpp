#pragma once

// 2-D keypoint detections with confidence scores, one table per trial.
// Stored as CSV: comment header with metadata, then frame,cam,site,u,v,score
// rows sorted by (frame, cam, site).  A missing row means the keypoint was
// not detected in that view (occlusion).

#include <span>
#include <string>
#include <vector>

#include "kinvar/errors.hpp"

namespace kinvar {

struct Obs {
    int frame = 0;
    int cam = 0;
    int site = 0;
    double u = 0, v = 0;
    double score = 0;
};

struct ObsTable {
    std::string name = "trial";
    double fps = 30.0;
    int num_frames = 0;
    int num_cams = 0;
    int num_sites = 0;
    std::vector<Obs> rows;

    // seconds covered by the frame grid
    double duration() const { return num_frames / fps; }
    double frame_time(int f) const { return f / fps; }

    // sorts rows, validates ranges, rebuilds the per-frame index
    void index();
    std::span<const Obs> at_frame(int f) const {
        return {rows.data() + frame_begin_[static_cast<std::size_t>(f)],
                frame_begin_[static_cast<std::size_t>(f) + 1] - frame_begin_[static_cast<std::size_t>(f)]};
    }

private:
    std::vector<std::size_t> frame_begin_;
};

ObsTable load_observations(const std::string& path);
void save_observations(const ObsTable& t, const std::string& path);

} // namespace kinvar
