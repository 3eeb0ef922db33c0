def find(parent, i):
    if parent[i] == i:
        return i
    return find(parent, parent[i])


def union(parent, rank, x, y, increment=1):
    root_x = find(parent, x)
    root_y = find(parent, y)
    if rank[root_x] < rank[root_y]:
        parent[root_x] = root_y
    elif rank[root_x] > rank[root_y]:
        parent[root_y] = root_x
    else:
        parent[root_y] = root_x
        rank[root_x] += increment


def kruskal(vertices, edges):
    result = []
    edges = sorted(edges, key=lambda edge: edge[2])
    parent = list(range(vertices))
    rank = [0] * vertices
    index = 0
    while len(result) < vertices - 1 and index < len(edges):
        u, v, weight = edges[index]
        index += 1
        if find(parent, u) != find(parent, v):
            result.append((u, v, weight))
            union(parent, rank, u, v)
    total = 0
    for _, _, weight in result:
        total += weight
    return result, total
