#pragma once

// Articulated body: a tree of segments, each attached to its parent by a
// joint (free 6-dof root, 1-dof hinge, or 3-dof ball with intrinsic-XYZ Euler
// angles).  Named sites on segments are the points cameras can observe.
// The root is usually free; a hinge/ball root is anchored at its offset
// (fixed-base mechanisms).
//
// Pose vector theta: free root [tx ty tz rx ry rz], then per joint in
// segment order (hinge: 1 angle, ball: 3 angles).  Radians and meters
// throughout.
//
// Shape vector beta: [segment scale factors (num_scales)] then [3 per site
// local offset corrections].  Scale factors multiply both the segment's
// attachment offsets for children and its site positions.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kinvar/math.hpp"
#include "kinvar/scalar_ops.hpp"

namespace kinvar::kin {

enum class JointType { FreeRoot, Hinge, Ball };

struct Joint {
    JointType type = JointType::Hinge;
    int axis = 1;                       // hinge axis: 0=x 1=y 2=z
    // per rotational dof limits; hinge uses index 0.  lo >= hi means unbounded.
    double lo[3] = {1, 1, 1};
    double hi[3] = {0, 0, 0};
};

struct Segment {
    std::string name;
    int parent = -1;                    // -1 only for the root
    Vec3 offset;                        // attachment point in the parent frame
    Joint joint;
    int scale_index = -1;               // beta scale slot, -1 = fixed scale 1
};

struct Site {
    std::string name;
    int segment = 0;
    Vec3 offset;                        // position in the segment frame
};

// one flattened pose dof
struct Dof {
    int segment = 0;
    bool bounded = false;
    double lo = 0, hi = 0;
};

struct Model {
    std::string name;
    std::vector<Segment> segments;      // topologically ordered, [0] is root
    std::vector<Site> sites;
    int num_scales = 0;

    std::vector<Dof> dofs;              // built by finalize()

    void finalize();                    // validates and builds dofs; throws ParseError
    int dof_count() const { return static_cast<int>(dofs.size()); }
    int site_count() const { return static_cast<int>(sites.size()); }
    int beta_size() const { return num_scales + 3 * static_cast<int>(sites.size()); }
};

// JSON round trip
Model load_model(const std::string& path);
Model model_from_json_text(const std::string& text);
std::string model_to_json_text(const Model& m);
void save_model(const Model& m, const std::string& path);

// forward kinematics over a generic scalar (double or ad::Value)
template <class S>
struct FkOut {
    std::vector<S> seg_pos;   // 3 per segment
    std::vector<S> seg_rot;   // 9 per segment, row-major
    std::vector<S> site_pos;  // 3 per site
};

template <class S>
void forward(const Model& m, std::span<const S> theta, std::span<const S> beta, FkOut<S>& out);

// convenience: site positions only, double path
std::vector<Vec3> site_positions(const Model& m, std::span<const double> theta,
                                 std::span<const double> beta);

extern template void forward<double>(const Model&, std::span<const double>,
                                     std::span<const double>, FkOut<double>&);
extern template void forward<ad::Value>(const Model&, std::span<const ad::Value>,
                                        std::span<const ad::Value>, FkOut<ad::Value>&);

} // namespace kinvar::kin
