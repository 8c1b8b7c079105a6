#pragma once

#include <filesystem>
#include <string>

#include "sbc/csv.hpp"
#include "sbc/evolution.hpp"
#include "sbc/fem.hpp"
#include "sbc/mesh.hpp"

namespace sbc {

/// Mesh dump: vertices.csv (id,x,y), triangles.csv (id,v0,v1,v2),
/// boundary.csv (id,v0,v1,s0,s1) with s1 = s0 + edge length.
inline void write_mesh_csv(const Mesh& mesh, const std::string& dir) {
    std::filesystem::create_directories(dir);
    CsvFile vertices("id,x,y");
    for (int i = 0; i < mesh.vertex_count(); ++i)
        vertices.add_row({std::to_string(i), fmt_double(mesh.vertices[i][0]),
                          fmt_double(mesh.vertices[i][1])});
    vertices.write(dir + "/vertices.csv");

    CsvFile triangles("id,v0,v1,v2");
    for (int t = 0; t < mesh.triangle_count(); ++t)
        triangles.add_row({std::to_string(t), std::to_string(mesh.triangles[t][0]),
                           std::to_string(mesh.triangles[t][1]),
                           std::to_string(mesh.triangles[t][2])});
    triangles.write(dir + "/triangles.csv");

    CsvFile boundary("id,v0,v1,s0,s1");
    for (int k = 0; k < static_cast<int>(mesh.boundary_edges.size()); ++k) {
        const auto& e = mesh.boundary_edges[k];
        const double s0 = mesh.boundary_arclength_values[k];
        boundary.add_row({std::to_string(k), std::to_string(e[0]), std::to_string(e[1]),
                          fmt_double(s0), fmt_double(s0 + mesh.edge_length(e[0], e[1]))});
    }
    boundary.write(dir + "/boundary.csv");
}

/// Sparse operator in matrix-market coordinate format (1-based indices).
inline void write_operator_market(const Eigen::SparseMatrix<double>& A,
                                  const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path);
    f << "%%MatrixMarket matrix coordinate real general\n";
    f << A.rows() << " " << A.cols() << " " << A.nonZeros() << "\n";
    for (int k = 0; k < A.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it)
            f << it.row() + 1 << " " << it.col() + 1 << " " << fmt_double(it.value()) << "\n";
}

/// Trajectory dump: columns step,vertex,value.
inline void write_trajectory_csv(const Trajectory& tr, const std::string& path) {
    CsvFile csv("step,vertex,value");
    for (int j = 0; j < static_cast<int>(tr.fields.size()); ++j)
        for (int i = 0; i < tr.fields[j].size(); ++i)
            csv.add_row({std::to_string(j), std::to_string(i), fmt_double(tr.fields[j][i])});
    csv.write(path);
}

} // namespace sbc
