# localno: local neural operator layers on grids, spheres and point clouds
