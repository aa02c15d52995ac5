#include "kinvar/observations.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace kinvar {

void ObsTable::index() {
    if (fps <= 0) throw ParseError("observations: fps must be positive");
    if (num_frames <= 0) throw ParseError("observations: num_frames must be positive");
    std::sort(rows.begin(), rows.end(), [](const Obs& a, const Obs& b) {
        if (a.frame != b.frame) return a.frame < b.frame;
        if (a.cam != b.cam) return a.cam < b.cam;
        return a.site < b.site;
    });
    for (const Obs& o : rows) {
        if (o.frame < 0 || o.frame >= num_frames) throw ParseError("observations: frame out of range");
        if (o.cam < 0 || o.cam >= num_cams) throw ParseError("observations: cam out of range");
        if (o.site < 0 || o.site >= num_sites) throw ParseError("observations: site out of range");
        if (o.score < 0) throw ParseError("observations: negative score");
    }
    frame_begin_.assign(static_cast<std::size_t>(num_frames) + 1, 0);
    for (const Obs& o : rows) frame_begin_[static_cast<std::size_t>(o.frame) + 1]++;
    for (std::size_t f = 1; f < frame_begin_.size(); ++f) frame_begin_[f] += frame_begin_[f - 1];
}

ObsTable load_observations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open observations file '" + path + "'");
    ObsTable t;
    bool header_seen = false;
    bool version_seen = false;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ss(line.substr(1));
            std::string key;
            ss >> key;
            if (key == "kinvar") {
                std::string what, ver;
                ss >> what >> ver;
                if (what != "observations" || ver != "v1")
                    throw ParseError(path + ": unsupported format '" + line + "'");
                version_seen = true;
            } else if (key == "name") {
                ss >> t.name;
            } else if (key == "fps") {
                ss >> t.fps;
            } else if (key == "frames") {
                ss >> t.num_frames;
            } else if (key == "cams") {
                ss >> t.num_cams;
            } else if (key == "sites") {
                ss >> t.num_sites;
            }
            continue;
        }
        if (!header_seen) {
            if (line != "frame,cam,site,u,v,score")
                throw ParseError(path + ":" + std::to_string(lineno) + ": unexpected column header");
            header_seen = true;
            continue;
        }
        Obs o;
        if (std::sscanf(line.c_str(), "%d,%d,%d,%lf,%lf,%lf", &o.frame, &o.cam, &o.site, &o.u,
                        &o.v, &o.score) != 6)
            throw ParseError(path + ":" + std::to_string(lineno) + ": malformed row");
        t.rows.push_back(o);
    }
    if (!version_seen) throw ParseError(path + ": missing '# kinvar observations v1' header");
    if (!header_seen) throw ParseError(path + ": missing column header");
    t.index();
    return t;
}

void save_observations(const ObsTable& t, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw Error("cannot write observations file '" + path + "'");
    std::fprintf(f, "# kinvar observations v1\n");
    std::fprintf(f, "# name %s\n", t.name.c_str());
    std::fprintf(f, "# fps %.17g\n", t.fps);
    std::fprintf(f, "# frames %d\n", t.num_frames);
    std::fprintf(f, "# cams %d\n", t.num_cams);
    std::fprintf(f, "# sites %d\n", t.num_sites);
    std::fprintf(f, "frame,cam,site,u,v,score\n");
    for (const Obs& o : t.rows)
        std::fprintf(f, "%d,%d,%d,%.17g,%.17g,%.17g\n", o.frame, o.cam, o.site, o.u, o.v, o.score);
    std::fclose(f);
}

} // namespace kinvar
