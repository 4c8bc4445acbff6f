"""Random graph models used to exercise the filter designs.

Two models are provided:

    Erdos-Renyi: every pair of the n nodes is linked by an independent
    Bernoulli trial with probability theta.

    Lattice stochastic block model: N_1 x ... x N_D populations of m nodes,
    each population indexed by a D-tuple. Pairs inside a population link with
    probability theta0; pairs whose population tuples differ in exactly one
    coordinate k, by exactly one step, link with probability thetas[k]. No
    other pairs link. The lattice does not wrap around.

Edges are drawn by iterating the candidate pairs directly (one Bernoulli draw
per pair, in a fixed order), so a given seed always yields the same graph.
"""
import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order

from consensus_filter_design.errors import GraphError
from consensus_filter_design.logger import log
from consensus_filter_design.seeding import make_rng, sub_seed, RESAMPLE_STREAM

EDGE_LIST_HEADER = 'n'
# Redraws allowed when a connected realization is required.
MAX_RESAMPLES = 10

class Graph(object):
    """Undirected simple graph.

    The edge set is held as an (m, 2) integer array of pairs (i, j), i < j,
    in lexicographic order. Degrees and the sparse adjacency matrix are
    derived on construction; the arrays are made read-only.
    """

    def __init__(self, n, edges):
        """Build a graph, checking it has no self-loops or repeated edges.

        Args:
            n (int): node count.
            edges (iterable): pairs of node indices (any order, either
            orientation).
        """
        n = int(n)
        if n < 1:
            raise GraphError('Graph needs at least one node, got n={}'.format(n))
        pairs = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges,
                           dtype=np.int64).reshape(-1, 2)
        if np.any(pairs < 0) or np.any(pairs >= n):
            raise GraphError('Edge endpoint out of range for n={}'.format(n))
        if np.any(pairs[:, 0] == pairs[:, 1]):
            raise GraphError('Self-loops are not allowed')
        pairs = np.sort(pairs, axis=1)
        order = np.lexsort((pairs[:, 1], pairs[:, 0]))
        pairs = pairs[order]
        if len(pairs) > 1 and np.any(np.all(pairs[1:] == pairs[:-1], axis=1)):
            raise GraphError('Repeated edges are not allowed')
        pairs.setflags(write=False)
        self.n = n
        self.edges = pairs
        data = np.ones(2*len(pairs))
        rows = np.concatenate((pairs[:, 0], pairs[:, 1]))
        cols = np.concatenate((pairs[:, 1], pairs[:, 0]))
        self.adjacency = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
        degrees = np.bincount(rows, minlength=n).astype(np.int64)
        degrees.setflags(write=False)
        self.degrees = degrees
        self._connected = None

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def connected(self):
        """Connectivity flag, certified by a traversal from node 0."""
        if self._connected is None:
            self._connected = is_connected(self)
        return self._connected

    def dense_adjacency(self):
        """Dense 0/1 adjacency matrix (float)."""
        return self.adjacency.toarray()

    def edge_set(self):
        """Edges as a set of (i, j) tuples with i < j."""
        return set(map(tuple, self.edges.tolist()))

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.edges, other.edges)

    def __repr__(self):
        return 'Graph(n={}, edges={})'.format(self.n, self.n_edges)

class ErdosRenyiParams(object):
    """Parameters of the Erdos-Renyi model G(n, theta)."""

    kind = 'erdos-renyi'

    def __init__(self, n, theta):
        if int(n) < 2:
            raise GraphError('Erdos-Renyi needs n >= 2, got {}'.format(n))
        if not 0.0 <= float(theta) <= 1.0:
            raise GraphError('Link probability theta={} outside [0, 1]'.format(theta))
        self.n = int(n)
        self.theta = float(theta)

    @property
    def node_count(self):
        return self.n

    def as_dict(self):
        return {'kind': self.kind, 'n': self.n, 'theta': self.theta}

class LatticeSbmParams(object):
    """Parameters of the D-dimensional lattice stochastic block model.

    Args:
        dims (list): population-grid extents N_1 ... N_D.
        m (int): nodes per population.
        theta0 (float): link probability inside a population.
        thetas (list): link probability along each lattice dimension.
    """

    kind = 'lattice-sbm'

    def __init__(self, dims, m, theta0, thetas=()):
        dims = [int(k) for k in dims]
        thetas = [float(t) for t in thetas]
        if len(dims) == 0 or any(k < 1 for k in dims):
            raise GraphError('Every lattice extent must be >= 1, got {}'.format(dims))
        if int(m) < 1:
            raise GraphError('Populations need m >= 1 nodes, got {}'.format(m))
        if len(thetas) != len(dims):
            raise GraphError('Expected {} per-dimension probabilities, got {}'.format(
                len(dims), len(thetas)))
        for t in [float(theta0)] + thetas:
            if not 0.0 <= t <= 1.0:
                raise GraphError('Link probability {} outside [0, 1]'.format(t))
        self.dims = dims
        self.m = int(m)
        self.theta0 = float(theta0)
        self.thetas = thetas

    @property
    def n_populations(self):
        return int(np.prod(self.dims))

    @property
    def node_count(self):
        return self.n_populations*self.m

    def as_dict(self):
        return {'kind': self.kind, 'dims': list(self.dims), 'm': self.m,
                'theta0': self.theta0, 'thetas': list(self.thetas)}

def generate_erdos_renyi(params, seed):
    """Draw an Erdos-Renyi graph.

    Each of the n(n-1)/2 pairs, taken in row-major upper-triangular order,
    is kept when its uniform draw falls below theta.

    Args:
        params (ErdosRenyiParams): model parameters.
        seed (int or tuple): generator seed.

    Returns:
        Graph
    """
    rng = make_rng(seed)
    rows, cols = np.triu_indices(params.n, k=1)
    keep = rng.random(len(rows)) < params.theta
    g = Graph(params.n, np.column_stack((rows[keep], cols[keep])))
    log.debug('Generated ER({}, {}) with {} edges'.format(params.n, params.theta, g.n_edges))
    return g

def _population_blocks(params):
    """Yield (first population, second population, probability) for every
    pair of populations that may link, in a fixed order. Within-population
    blocks are yielded with the same population twice.
    """
    populations = list(np.ndindex(*params.dims))
    index = {p: i for i, p in enumerate(populations)}
    for p in populations:
        yield index[p], index[p], params.theta0
        for k in range(len(params.dims)):
            neighbour = list(p)
            neighbour[k] += 1
            if neighbour[k] < params.dims[k]:
                yield index[p], index[tuple(neighbour)], params.thetas[k]

def generate_lattice_sbm(params, seed):
    """Draw a lattice stochastic block model graph.

    Node ids are assigned population by population (populations in C order
    of their tuples), m consecutive ids per population.

    Args:
        params (LatticeSbmParams): model parameters.
        seed (int or tuple): generator seed.

    Returns:
        Graph
    """
    rng = make_rng(seed)
    m = params.m
    inner_rows, inner_cols = np.triu_indices(m, k=1)
    cross_rows, cross_cols = np.divmod(np.arange(m*m), m)
    chunks = []
    for a, b, theta in _population_blocks(params):
        if a == b:
            rows, cols = inner_rows, inner_cols
        else:
            rows, cols = cross_rows, cross_cols
        keep = rng.random(len(rows)) < theta
        chunks.append(np.column_stack((a*m + rows[keep], b*m + cols[keep])))
    edges = np.concatenate(chunks) if chunks else np.zeros((0, 2), dtype=np.int64)
    g = Graph(params.node_count, edges)
    log.debug('Generated lattice SBM {}x{} with {} edges'.format(
        params.dims, m, g.n_edges))
    return g

def generate(params, seed):
    """Dispatch on the parameter type."""
    if isinstance(params, ErdosRenyiParams):
        return generate_erdos_renyi(params, seed)
    if isinstance(params, LatticeSbmParams):
        return generate_lattice_sbm(params, seed)
    raise GraphError('Unknown graph model: {!r}'.format(params))

def generate_connected(params, seed, max_resamples=MAX_RESAMPLES):
    """Draw a connected realization.

    The first draw uses seed; redraw k uses sub_seed(seed, RESAMPLE_STREAM, k).

    Raises:
        GraphError: every draw was disconnected.
    """
    for attempt in range(max_resamples + 1):
        draw_seed = seed if attempt == 0 else sub_seed(seed, RESAMPLE_STREAM, attempt)
        g = generate(params, draw_seed)
        if g.connected:
            return g
        log.warning('Realization (seed {}) disconnected; resampling'.format(draw_seed))
    raise GraphError('disconnected-graph resampling exhausted after {} retries (seed {})'.format(
        max_resamples, seed))

def expected_adjacency(params):
    """Matrix of link probabilities E[A] with zero diagonal.

    Args:
        params (ErdosRenyiParams or LatticeSbmParams): model parameters.

    Returns:
        numpy array (N, N).
    """
    if isinstance(params, ErdosRenyiParams):
        mean = np.full((params.n, params.n), params.theta)
    elif isinstance(params, LatticeSbmParams):
        n_pop = params.n_populations
        block = np.zeros((n_pop, n_pop))
        for a, b, theta in _population_blocks(params):
            block[a, b] = block[b, a] = theta
        mean = np.kron(block, np.ones((params.m, params.m)))
    else:
        raise GraphError('Unknown graph model: {!r}'.format(params))
    np.fill_diagonal(mean, 0.0)
    return mean

def is_connected(g):
    """True iff a breadth-first traversal from node 0 reaches every node."""
    if g.n == 1:
        return True
    reached = breadth_first_order(g.adjacency, 0, directed=False,
                                  return_predecessors=False)
    return len(reached) == g.n

def write_edge_list(g, path):
    """Write a graph as "n <count>" followed by one "u v" line per edge."""
    with open(path, 'w') as f:
        f.write('{} {}\n'.format(EDGE_LIST_HEADER, g.n))
        for i, j in g.edges.tolist():
            f.write('{} {}\n'.format(i, j))

def read_edge_list(path):
    """Read a graph written by write_edge_list.

    Raises:
        GraphError: the header is missing or a line is malformed.
    """
    with open(path, 'r') as f:
        lines = [line.strip() for line in f if line.strip()]
    if not lines:
        raise GraphError('Empty edge-list file: {}'.format(path))
    header = lines[0].split()
    if len(header) != 2 or header[0] != EDGE_LIST_HEADER:
        raise GraphError('Bad edge-list header in {}: {!r}'.format(path, lines[0]))
    edges = []
    for number, line in enumerate(lines[1:], start=2):
        fields = line.split()
        try:
            edges.append((int(fields[0]), int(fields[1])))
        except (ValueError, IndexError) as err:
            raise GraphError('{}:{}: expected "u v", got {!r}'.format(
                path, number, line)) from err
    return Graph(int(header[1]), edges)

