#include "buckopt/assembly.hpp"

#include <algorithm>

namespace buckopt {

namespace {

// sorted union of the 27 periodic neighbors of node b (duplicates collapse on
// coarse grids where n <= 2)
std::vector<int> neighbor_nodes(int n, int b) {
    int i = b % n, j = (b / n) % n, k = b / (n * n);
    std::vector<int> out;
    out.reserve(27);
    for (int dk = -1; dk <= 1; dk++)
        for (int dj = -1; dj <= 1; dj++)
            for (int di = -1; di <= 1; di++) {
                int ii = (i + di + n) % n, jj = (j + dj + n) % n, kk = (k + dk + n) % n;
                out.push_back((kk * n + jj) * n + ii);
            }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace

StencilMatrix::StencilMatrix(const VoxelGrid& grid, int ncomp, bool embedded)
    : n_(grid.n), ncomp_(ncomp), D_(ncomp * grid.nnode()), embedded_(embedded) {
    const int N = grid.nnode();
    const int dim = embedded_ ? 2 * D_ : D_;
    mat_.resize(dim, dim);

    std::vector<int> counts(dim);
    std::vector<std::vector<int>> nbrs(N);
    for (int b = 0; b < N; b++) nbrs[b] = neighbor_nodes(n_, b);

    for (int b = 0; b < N; b++) {
        int rows = int(nbrs[b].size()) * ncomp_;
        for (int cc = 0; cc < ncomp_; cc++) {
            counts[ncomp_ * b + cc] = embedded_ ? 2 * rows : rows;
            if (embedded_) counts[D_ + ncomp_ * b + cc] = 2 * rows;
        }
    }
    mat_.reserve(counts);
    for (int b = 0; b < N; b++) {
        for (int cc = 0; cc < ncomp_; cc++) {
            int col = ncomp_ * b + cc;
            for (int a : nbrs[b])
                for (int cr = 0; cr < ncomp_; cr++) mat_.insert(ncomp_ * a + cr, col) = 0.0;
            if (embedded_)
                for (int a : nbrs[b])
                    for (int cr = 0; cr < ncomp_; cr++) mat_.insert(D_ + ncomp_ * a + cr, col) = 0.0;
        }
    }
    if (embedded_) {
        for (int b = 0; b < N; b++)
            for (int cc = 0; cc < ncomp_; cc++) {
                int col = D_ + ncomp_ * b + cc;
                for (int half = 0; half < 2; half++)
                    for (int a : nbrs[b])
                        for (int cr = 0; cr < ncomp_; cr++)
                            mat_.insert(half * D_ + ncomp_ * a + cr, col) = 0.0;
            }
    }
    mat_.makeCompressed();
}

void StencilMatrix::zero() {
    std::fill(mat_.valuePtr(), mat_.valuePtr() + mat_.nonZeros(), 0.0);
}

int StencilMatrix::slot(int row, int col) const {
    const int* begin = mat_.innerIndexPtr() + mat_.outerIndexPtr()[col];
    const int* end = mat_.innerIndexPtr() + mat_.outerIndexPtr()[col + 1];
    const int* it = std::lower_bound(begin, end, row);
    return int(it - mat_.innerIndexPtr());
}

void StencilMatrix::add(int node_r, int cr, int node_c, int cc, double v, double ca, double sa) {
    int r = ncomp_ * node_r + cr, c = ncomp_ * node_c + cc;
    if (!embedded_) {
        mat_.valuePtr()[slot(r, c)] += v * ca;
        return;
    }
    double A = v * ca, Bv = v * sa;
    mat_.valuePtr()[slot(r, c)] += A;
    mat_.valuePtr()[slot(r + D_, c + D_)] += A;
    if (Bv != 0.0) {
        mat_.valuePtr()[slot(r + D_, c)] += Bv;
        mat_.valuePtr()[slot(r, c + D_)] -= Bv;
    }
}

VectorXd StencilMatrix::mult(const VectorXd& v) const { return mat_ * v; }

VectorXcd StencilMatrix::mult(const VectorXcd& v) const {
    if (!embedded_) {
        VectorXd re = mat_ * v.real().eval();
        VectorXd im = mat_ * v.imag().eval();
        return re + std::complex<double>(0, 1) * im;
    }
    VectorXd emb(2 * D_);
    emb.head(D_) = v.real();
    emb.tail(D_) = v.imag();
    VectorXd y = mat_ * emb;
    VectorXcd out(D_);
    out.real() = y.head(D_);
    out.imag() = y.tail(D_);
    return out;
}

ElementDofs element_dofs(const VoxelGrid& grid, int e) {
    ElementDofs ed;
    for (int c = 0; c < 8; c++) grid.corner(e, c, ed.node[c], ed.wrap[c]);
    return ed;
}

namespace {

struct PhaseTable {
    // cos/sin of k.(wrap_col - wrap_row) for all wrap pairs; wraps are 0/1 so
    // the difference per axis is in {-1,0,1}
    double ca[8][8], sa[8][8];
    PhaseTable(const ElementDofs& ed, const Vec3& k) {
        for (int a = 0; a < 8; a++)
            for (int b = 0; b < 8; b++) {
                double arg = 0;
                for (int d = 0; d < 3; d++) arg += k(d) * (ed.wrap[b][d] - ed.wrap[a][d]);
                ca[a][b] = std::cos(arg);
                sa[a][b] = std::sin(arg);
            }
    }
};

}  // namespace

void assemble_k0(StencilMatrix& K, const VoxelGrid& grid, const H11Element& el,
                 const VectorXd& rho_phys, const BaseMaterial& mat, const WaveVector& k) {
    K.zero();
    const bool real = k.is_real();
    for (int e = 0; e < grid.nelem(); e++) {
        double Ee = mat.interp_k(rho_phys(e));
        ElementDofs ed = element_dofs(grid, e);
        PhaseTable pt(ed, k.k);
        for (int b = 0; b < 8; b++)
            for (int a = 0; a < 8; a++) {
                double ca = pt.ca[a][b], sa = real ? 0.0 : pt.sa[a][b];
                for (int j = 0; j < 3; j++)
                    for (int i = 0; i < 3; i++)
                        K.add(ed.node[a], i, ed.node[b], j, Ee * el.k0(3 * a + i, 3 * b + j), ca, sa);
            }
    }
}

void assemble_ksig(StencilMatrix& K, const VoxelGrid& grid, const std::vector<Mat8>& ks8,
                   const WaveVector& k) {
    K.zero();
    const bool real = k.is_real();
    for (int e = 0; e < grid.nelem(); e++) {
        const Mat8& ks = ks8[e];
        ElementDofs ed = element_dofs(grid, e);
        PhaseTable pt(ed, k.k);
        for (int b = 0; b < 8; b++)
            for (int a = 0; a < 8; a++)
                K.add(ed.node[a], 0, ed.node[b], 0, ks(a, b), pt.ca[a][b], real ? 0.0 : pt.sa[a][b]);
    }
}

Eigen::MatrixXd assemble_unit_loads(const VoxelGrid& grid, const H11Element& el,
                                    const VectorXd& rho_phys, const BaseMaterial& mat) {
    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(grid.ndof(), 6);
    for (int e = 0; e < grid.nelem(); e++) {
        double Ee = mat.interp_k(rho_phys(e));
        ElementDofs ed = element_dofs(grid, e);
        for (int c = 0; c < 8; c++)
            for (int d = 0; d < 3; d++) F.row(3 * ed.node[c] + d) += Ee * el.f0.row(3 * c + d);
    }
    return F;
}

}  // namespace buckopt
